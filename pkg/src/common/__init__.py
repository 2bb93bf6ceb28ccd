"""Common helpers: seeding, parallel fan-out, CSV tables and error types."""
