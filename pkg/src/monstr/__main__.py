import sys

from monstr.cli import main

sys.exit(main())
