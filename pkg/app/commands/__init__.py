"""Subcommands of the ``recofactor`` command line; each module exposes
``register(subparsers)`` and sets ``handler`` on its parser."""
