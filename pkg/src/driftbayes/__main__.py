"""Allow ``python3 -m driftbayes`` as an alias for the console script."""

from .cli import main

main()
