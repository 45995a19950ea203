"""Sum-rate optimization for a UAV-mounted reflecting surface serving multiple users."""
__version__ = "0.1.0"
