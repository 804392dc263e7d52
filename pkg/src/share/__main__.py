import sys

from share.cli import main

sys.exit(main())
