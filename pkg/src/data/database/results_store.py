"""
SQLAlchemy persistence of experiment rows
"""
import logging
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional

from sqlalchemy import Boolean, Column, DateTime, Float, Integer, String, create_engine
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import declarative_base, sessionmaker

from src.utils.config import get_settings

logger = logging.getLogger(__name__)

Base = declarative_base()

# Columns written by save_runs, in the order of the experiment CSV
RUN_FIELDS = [
    "count", "seed", "policy", "schedulable", "mode", "synthesis_s",
    "ts_max_jitter_ns", "ts_max_delay_ns", "ts_mean_delay_ns",
    "utilization", "ts_utilization", "be_utilization",
    "be_transmitted", "be_dropped", "misses", "conservation_ok", "error",
]


class ExperimentRun(Base):
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)
    count = Column(Integer, nullable=False)
    seed = Column(Integer, nullable=False)
    policy = Column(String(32), nullable=False)
    schedulable = Column(Boolean, nullable=False)
    mode = Column(String(32))
    synthesis_s = Column(Float)
    ts_max_jitter_ns = Column(Integer)
    ts_max_delay_ns = Column(Integer)
    ts_mean_delay_ns = Column(Float)
    utilization = Column(Float)
    ts_utilization = Column(Float)
    be_utilization = Column(Float)
    be_transmitted = Column(Integer)
    be_dropped = Column(Integer)
    misses = Column(Integer)
    conservation_ok = Column(Boolean)
    error = Column(String(512))

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in RUN_FIELDS}


def init_db(url: Optional[str] = None):
    """Create the experiment_runs table and return a session factory"""
    url = url or get_settings().database_url
    engine = create_engine(url, future=True)
    Base.metadata.create_all(engine)
    logger.info(f"Results database ready at {engine.url.render_as_string(hide_password=True)}")
    return sessionmaker(bind=engine, future=True)


def save_runs(session_factory, rows: Iterable[Dict[str, Any]]) -> int:
    """Insert experiment rows; unknown keys are ignored"""
    records = [ExperimentRun(**{k: row.get(k) for k in RUN_FIELDS}) for row in rows]
    session = session_factory()
    try:
        session.add_all(records)
        session.commit()
    except SQLAlchemyError as e:
        session.rollback()
        logger.error(f"Error saving experiment runs: {str(e)}")
        raise
    finally:
        session.close()
    logger.info(f"Saved {len(records)} experiment runs")
    return len(records)


def load_runs(session_factory, policy: Optional[str] = None) -> List[Dict[str, Any]]:
    """Stored rows in canonical (count, seed, policy) order"""
    session = session_factory()
    try:
        query = session.query(ExperimentRun)
        if policy is not None:
            query = query.filter(ExperimentRun.policy == policy)
        query = query.order_by(ExperimentRun.count, ExperimentRun.seed, ExperimentRun.policy, ExperimentRun.id)
        return [run.to_dict() for run in query.all()]
    finally:
        session.close()
