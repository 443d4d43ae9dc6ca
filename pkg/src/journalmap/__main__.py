import sys

from journalmap.cli import main

sys.exit(main())
