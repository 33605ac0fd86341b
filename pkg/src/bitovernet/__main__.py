import sys

from bitovernet.cli import main

sys.exit(main())
