//! Demonstration-seeded actor-critic learner.
