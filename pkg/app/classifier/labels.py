from __future__ import annotations

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__

from app.domain.exceptions import LabelError


class ClassLabel(StrEnum):
    PENALTY_KICK = "PenaltyKick"
    CORNER_KICK = "CornerKick"
    FREE_KICK = "FreeKick"
    TACKLE = "Tackle"
    TO_SUBSTITUTE = "ToSubstitute"
    RED_CARD = "RedCard"
    YELLOW_CARD = "YellowCard"
    CENTER_CIRCLE = "CenterCircle"
    LEFT_PENALTY_AREA = "LeftPenaltyArea"
    RIGHT_PENALTY_AREA = "RightPenaltyArea"


class NineClassView(StrEnum):
    PENALTY_KICK = "PenaltyKick"
    CORNER_KICK = "CornerKick"
    FREE_KICK = "FreeKick"
    TACKLE = "Tackle"
    TO_SUBSTITUTE = "ToSubstitute"
    CARD = "Card"
    CENTER_CIRCLE = "CenterCircle"
    LEFT_PENALTY_AREA = "LeftPenaltyArea"
    RIGHT_PENALTY_AREA = "RightPenaltyArea"


class PoolLabel(StrEnum):
    """Unlabelled image pools used only to test no-highlight rejection."""

    OTHER_SOCCER = "OtherSoccer"
    NON_SOCCER = "NonSoccer"


class CardColor(StrEnum):
    YELLOW = "Yellow"
    RED = "Red"


TEN_CLASSES: tuple[ClassLabel, ...] = tuple(ClassLabel)
NINE_CLASSES: tuple[NineClassView, ...] = tuple(NineClassView)
CARD_COLORS: tuple[CardColor, ...] = (CardColor.YELLOW, CardColor.RED)

EVENT_CLASSES: frozenset[ClassLabel] = frozenset(
    {
        ClassLabel.PENALTY_KICK,
        ClassLabel.CORNER_KICK,
        ClassLabel.FREE_KICK,
        ClassLabel.TACKLE,
        ClassLabel.TO_SUBSTITUTE,
        ClassLabel.RED_CARD,
        ClassLabel.YELLOW_CARD,
    }
)
SCENE_CLASSES: frozenset[ClassLabel] = frozenset(set(ClassLabel) - EVENT_CLASSES)

_CARD_TO_LABEL = {CardColor.YELLOW: ClassLabel.YELLOW_CARD, CardColor.RED: ClassLabel.RED_CARD}
_SCENE_VIEWS = frozenset(
    {
        NineClassView.CENTER_CIRCLE,
        NineClassView.LEFT_PENALTY_AREA,
        NineClassView.RIGHT_PENALTY_AREA,
    }
)


def is_event_label(label: ClassLabel) -> bool:
    return label in EVENT_CLASSES


def merge_card_labels(label: ClassLabel) -> NineClassView:
    if label in (ClassLabel.RED_CARD, ClassLabel.YELLOW_CARD):
        return NineClassView.CARD
    return NineClassView(label.value)


def is_scene_class(c: NineClassView) -> bool:
    return c in _SCENE_VIEWS


def card_label(color: CardColor) -> ClassLabel:
    return _CARD_TO_LABEL[color]


def card_color(label: ClassLabel) -> CardColor:
    for color, card in _CARD_TO_LABEL.items():
        if card is label:
            return color
    raise LabelError(f"{label} is not a card label")


def view_to_event_label(view: NineClassView) -> ClassLabel:
    """Map a non-card, non-scene 9-class prediction back to its event label."""
    if view is NineClassView.CARD or is_scene_class(view):
        raise LabelError(f"{view} has no direct event label")
    return ClassLabel(view.value)


def parse_label(name: str) -> ClassLabel | PoolLabel:
    for enum in (ClassLabel, PoolLabel):
        try:
            return enum(name)
        except ValueError:
            continue
    raise LabelError(f"unknown class name: {name!r}")
