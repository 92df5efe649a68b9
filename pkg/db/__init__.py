"""
Database package: SQLite run ledger and CIGRID field files
"""

from .database import RunDatabase
from .cigrid import read_field, read_header, write_field

__all__ = ['RunDatabase', 'read_field', 'read_header', 'write_field']
