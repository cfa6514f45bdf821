import sys

from rs_coded_caching.cli import main

sys.exit(main())
