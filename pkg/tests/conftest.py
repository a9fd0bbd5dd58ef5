"""Keeps the tests directory on sys.path so test modules can import the
shared stub helpers in stubs.py."""
