"""Timeline assembly, dispatch, power-flow snapshots and measurement output."""
