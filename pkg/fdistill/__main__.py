"""Allow ``python -m fdistill`` to run the command line."""

import sys

from fdistill.experiments.cli import main

sys.exit(main())
