import sys

from fsoalloc.harness.cli import main

sys.exit(main())
