"""Allow ``python -m nsvar`` as an alias for the ``nsvar`` script."""

from .cli import main

main()
