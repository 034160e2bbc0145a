import sys

from hmxforge.cli import main

sys.exit(main())
