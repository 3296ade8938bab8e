"""
Run-log storage. Every recorded CLI run becomes one ``RunLog`` row in the
database named by DSPECTRUM_DATABASE_URL (SQLite in the data dir by default).
"""
from contextlib import contextmanager
from typing import Iterator

from sqlalchemy import create_engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from .config import DATABASE_URL


def _connect_args(url: str) -> dict:
    return {"check_same_thread": False} if url.startswith("sqlite") else {}


engine = create_engine(DATABASE_URL, connect_args=_connect_args(DATABASE_URL))

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()


def init_run_log() -> None:
    """Create the run-log table if it does not exist yet."""
    from . import models  # noqa: F401  registers RunLog on Base

    Base.metadata.create_all(bind=engine)


@contextmanager
def run_log_session() -> Iterator[Session]:
    """A session on an initialised run log, rolled back on error and always closed."""
    init_run_log()
    db = SessionLocal()
    try:
        yield db
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
