import sys

from zorro.cli import main

sys.exit(main())
