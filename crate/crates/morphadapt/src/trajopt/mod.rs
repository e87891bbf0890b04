//! Gradient-free trajectory optimization over learned dynamics.
