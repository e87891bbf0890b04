//! CLI, configuration, persistence and pipeline orchestration.
