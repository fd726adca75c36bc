"""Module entry point for `python -m polyflow`."""

import sys

from .cli import main

sys.exit(main())
