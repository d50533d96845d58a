import sys

from frontdescent.cli import main

sys.exit(main())
