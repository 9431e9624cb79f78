import sys

from contdml.cli import main

sys.exit(main())
