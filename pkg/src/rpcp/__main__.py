import sys

from rpcp.cli import main

sys.exit(main())
