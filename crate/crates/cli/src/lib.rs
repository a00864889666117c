//! Placeholder; populated once core lands.
