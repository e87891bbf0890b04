//! Learned spatio-temporal forward dynamics model.
