from datetime import datetime
from sqlalchemy import Column, Integer, String, DateTime, JSON

from app.core.database import Base


class BenchmarkRun(Base):
    """Database model for stored benchmark runs"""

    __tablename__ = "benchmark_runs"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(String, unique=True, index=True, nullable=False)
    detector = Column(String, nullable=False)
    parameters = Column(String, nullable=False)
    seed = Column(Integer, nullable=False)
    corpus_dir = Column(String, nullable=True)
    metrics = Column(JSON, nullable=False)
    outcomes = Column(JSON, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)
