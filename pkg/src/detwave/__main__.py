import sys

from detwave.cli import main

sys.exit(main())
