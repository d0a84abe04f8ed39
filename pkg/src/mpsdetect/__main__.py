import sys

from mpsdetect.cli import main

sys.exit(main())
