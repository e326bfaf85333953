"""Wind speed synthesis and power conversion."""
