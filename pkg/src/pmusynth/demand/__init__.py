"""Per-bus load synthesis: hourly build-up, minutely patterns, zone assignment."""
