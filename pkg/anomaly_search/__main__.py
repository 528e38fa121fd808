import sys

from anomaly_search.cli import main

sys.exit(main())
