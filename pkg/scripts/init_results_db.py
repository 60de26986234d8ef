import os
import sys
import logging

# Add project root to Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.data.database.results_store import init_db, load_runs
from src.utils.config import get_settings
from src.utils.utils import LOG_FORMAT

# Set up logging
logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
logger = logging.getLogger(__name__)

def initialize_results_db(url=None):
    """Create the experiment_runs table and report how many rows it holds"""
    url = url or get_settings().database_url
    try:
        logger.info(f"Initializing results database at {url}")
        session_factory = init_db(url)
        rows = load_runs(session_factory)
        logger.info(f"Table 'experiment_runs' is ready with {len(rows)} stored runs")
        return True
    except Exception as e:
        logger.error(f"Error initializing results database: {str(e)}")
        return False

if __name__ == "__main__":
    initialize_results_db(sys.argv[1] if len(sys.argv) > 1 else None)
