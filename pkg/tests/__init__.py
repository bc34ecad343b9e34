# __init__.py

import os
import sys


# Add the source directory to the path so that the package can be imported without installing it
source_directory = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src"))
sys.path.insert(0, source_directory)

from prepbench.logger import setup_logger  # noqa: E402

setup_logger()
