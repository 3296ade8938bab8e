from datetime import datetime

from sqlalchemy import JSON, Column, DateTime, Integer, String

from .database import Base


class RunLog(Base):
    __tablename__ = "run_logs"

    id = Column(Integer, primary_key=True, index=True)
    subcommand = Column(String, index=True, nullable=False)
    arguments = Column(JSON, nullable=False)
    exit_code = Column(Integer, nullable=False)
    summary = Column(JSON, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)
