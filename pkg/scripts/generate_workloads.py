"""
Generate seeded flow set and scenario files for the standard flow counts
"""
import os
import sys
import time
import logging
import argparse
from tqdm import tqdm
from typing import Dict, List

# Add project root to Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.models.flow.flow_model import dump_flowset, serialize_flowset
from src.simulation.workload import PERIOD_RATIOS, generate_workload
from src.utils.exceptions import NdsError
from src.utils.utils import LOG_FORMAT, ensure_dir, write_json

# Set up logging
logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
logger = logging.getLogger(__name__)

def generate_workload_files(out_dir: str, counts: List[int], seeds: List[int], be_load: float = 0.5, policy: str = "DQS") -> Dict[str, int]:
    """Write flowset_<count>_<seed>.json and scenario_<count>_<seed>.json files"""
    start_time = time.time()
    ensure_dir(out_dir)

    # Stats for tracking
    stats = {
        "total": len(counts) * len(seeds),
        "written": 0,
        "errors": 0
    }

    cases = [(count, seed) for count in counts for seed in seeds]
    for count, seed in tqdm(cases, desc="Generating workloads"):
        try:
            flowset = generate_workload(count, seed)
            dump_flowset(flowset, os.path.join(out_dir, f"flowset_{count}_{seed}.json"))
            write_json(os.path.join(out_dir, f"scenario_{count}_{seed}.json"), {
                "flowset": serialize_flowset(flowset),
                "policy": policy,
                "seed": seed,
                "be_load": be_load,
            })
            stats["written"] += 1
        except NdsError as e:
            logger.error(f"Error generating {count} flows with seed {seed}: {str(e)}")
            stats["errors"] += 1

    elapsed_time = time.time() - start_time
    logger.info(f"Workload generation completed in {elapsed_time:.2f} seconds")
    logger.info(f"Workloads: {stats['total']}, written: {stats['written']}, errors: {stats['errors']}")
    return stats

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description='Generate seeded TSN workload files')
    parser.add_argument('--out-dir', type=str, default="workloads", help='Directory to write the files to')
    parser.add_argument('--counts', type=int, nargs='+', default=sorted(PERIOD_RATIOS), help='TS flow counts')
    parser.add_argument('--seeds', type=int, default=20, help='Number of seeds, starting at 1')
    parser.add_argument('--be-load', type=float, default=0.5, help='BE load fraction written into the scenarios')
    parser.add_argument('--policy', type=str, default="DQS", help='BE policy written into the scenarios')

    args = parser.parse_args()
    generate_workload_files(args.out_dir, args.counts, list(range(1, args.seeds + 1)), args.be_load, args.policy)
