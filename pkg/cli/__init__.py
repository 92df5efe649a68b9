"""
Command-line front-end
"""

from .commands import cmd_dump, cmd_feasible, cmd_info, cmd_run, cmd_verify

__all__ = ['cmd_feasible', 'cmd_run', 'cmd_verify', 'cmd_dump', 'cmd_info']
