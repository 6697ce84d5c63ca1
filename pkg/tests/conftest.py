import os
import sys

# allow test modules to import shared frozen tables from each other
sys.path.insert(0, os.path.dirname(__file__))
