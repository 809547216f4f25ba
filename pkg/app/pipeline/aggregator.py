"""Temporal aggregation: windowed majority vote over frame verdicts, then per-kind dedup.

A tag is centred on frame c when frames c-h .. c+h (h = window // 2) are all present
and at least `majority` of them are events of one kind. Tags of one kind closer than
`dedup_window_s` to the last emitted occurrence of that kind are suppressed, so each
burst is counted once at its earliest tag.
"""

from __future__ import annotations

import bisect
from collections import Counter, deque
from collections.abc import Sequence

from app.classifier.labels import ClassLabel
from app.domain.exceptions import FrameOrderError
from app.pipeline.schemas import (
    EventDetected,
    EventOccurrence,
    EventTag,
    FrameVerdict,
    PipelineConfig,
)


def _tag_window(window: Sequence[FrameVerdict], config: PipelineConfig) -> EventTag | None:
    """Vote over a complete, contiguous window."""
    kinds = Counter(v.event_kind for v in window if v.event_kind is not None)
    if not kinds:
        return None
    kind, count = kinds.most_common(1)[0]
    if count < config.majority:
        return None
    confidences = [
        v.outcome.confidence
        for v in window
        if isinstance(v.outcome, EventDetected) and v.outcome.kind is kind
    ]
    center = window[config.half_window].frame_index
    return EventTag(
        kind=kind,
        center=center,
        first_frame=window[0].frame_index,
        last_frame=window[-1].frame_index,
        count=count,
        confidence_mean=min(1.0, sum(confidences) / len(confidences)),
        timestamp_s=center / config.fps,
    )


def _vote_at(
    verdicts: Sequence[FrameVerdict], indices: Sequence[int], center: int, config: PipelineConfig
) -> EventTag | None:
    h = config.half_window
    start = bisect.bisect_left(indices, center - h)
    window = verdicts[start : start + config.window]
    # Strictly increasing indices: matching ends means every frame in between is present.
    if len(window) < config.window:
        return None
    if window[0].frame_index != center - h or window[-1].frame_index != center + h:
        return None
    return _tag_window(window, config)


def _check_order(verdicts: Sequence[FrameVerdict]) -> None:
    for prev, cur in zip(verdicts, verdicts[1:], strict=False):
        if cur.frame_index <= prev.frame_index:
            raise FrameOrderError(cur.frame_index, prev.frame_index)


def window_vote(
    verdicts: Sequence[FrameVerdict], center: int, config: PipelineConfig
) -> EventTag | None:
    """Tag centred on `center`, or None when the window lacks context or a majority."""
    _check_order(verdicts)
    return _vote_at(verdicts, [v.frame_index for v in verdicts], center, config)


class _DedupState:
    def __init__(self, config: PipelineConfig):
        self._config = config
        self._last_center: dict[ClassLabel, int] = {}

    def admit(self, tag: EventTag) -> EventOccurrence | None:
        last = self._last_center.get(tag.kind)
        # Frame difference over fps: 300 frames at 30 fps is exactly 10.0 s.
        gap_s = None if last is None else (tag.center - last) / self._config.fps
        if gap_s is not None and gap_s < self._config.dedup_window_s:
            return None
        self._last_center[tag.kind] = tag.center
        return EventOccurrence.from_tag(tag)


def dedup(tags: Sequence[EventTag], config: PipelineConfig) -> list[EventOccurrence]:
    state = _DedupState(config)
    return [occ for tag in tags if (occ := state.admit(tag)) is not None]


def aggregate(
    verdicts: Sequence[FrameVerdict], config: PipelineConfig
) -> tuple[list[EventTag], list[EventOccurrence]]:
    """Batch form: every tag with full context, and the deduplicated occurrences."""
    _check_order(verdicts)
    indices = [v.frame_index for v in verdicts]
    tags = [t for c in indices if (t := _vote_at(verdicts, indices, c, config)) is not None]
    return tags, dedup(tags, config)


class EventAggregator:
    """Streaming form of `aggregate`; verdicts must arrive in increasing frame order."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.tags: list[EventTag] = []
        self.occurrences: list[EventOccurrence] = []
        self._buffer: deque[FrameVerdict] = deque(maxlen=config.window)
        self._dedup = _DedupState(config)
        self._last_index: int | None = None

    def push(self, verdict: FrameVerdict) -> EventOccurrence | None:
        index = verdict.frame_index
        if self._last_index is not None and index <= self._last_index:
            raise FrameOrderError(index, self._last_index)
        if self._last_index is not None and index != self._last_index + 1:
            self._buffer.clear()
        self._last_index = index
        self._buffer.append(verdict)
        if len(self._buffer) < self.config.window:
            return None
        tag = _tag_window(list(self._buffer), self.config)
        if tag is None:
            return None
        self.tags.append(tag)
        occurrence = self._dedup.admit(tag)
        if occurrence is not None:
            self.occurrences.append(occurrence)
        return occurrence
