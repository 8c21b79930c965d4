import sys

from iscat.cli import main

sys.exit(main())
