import sys

from rumble.cli import main

sys.exit(main())
