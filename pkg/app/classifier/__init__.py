"""Nine-class event classifier slice (labels, backbone, training, thresholded inference)."""
