"""Allow ``python -m shufscan``."""

import sys

from .cli import main

sys.exit(main())
