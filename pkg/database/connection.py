"""Database connection management for the run ledger."""

import logging
import os
from contextlib import contextmanager
from typing import Generator

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker
from sqlalchemy.pool import StaticPool

from database.models import Base

logger = logging.getLogger(__name__)

# Unset disables the ledger; see ledger_url()
RUNS_DB_ENV = 'SAMNET_RUNS_DB'

_engines: dict[str, Engine] = {}
_sessions: dict[str, sessionmaker] = {}


def ledger_url() -> str | None:
    """Ledger URL from the environment, or ``None`` when recording is off."""
    return os.getenv(RUNS_DB_ENV) or None


def get_engine(url: str) -> Engine:
    """One engine per URL; in-memory SQLite shares a single connection."""
    if url not in _engines:
        kwargs: dict = {'echo': os.getenv('DB_ECHO', 'False').lower() == 'true'}
        if url == 'sqlite://' or (url.startswith('sqlite') and ':memory:' in url):
            kwargs.update(connect_args={'check_same_thread': False}, poolclass=StaticPool)
        _engines[url] = create_engine(url, **kwargs)
        _sessions[url] = sessionmaker(autocommit=False, autoflush=False, bind=_engines[url])
    return _engines[url]


@event.listens_for(Engine, 'connect')
def set_sqlite_pragma(dbapi_conn, connection_record):
    """Enforce foreign keys on SQLite connections."""
    if type(dbapi_conn).__module__.startswith('sqlite3'):
        cursor = dbapi_conn.cursor()
        cursor.execute('PRAGMA foreign_keys=ON')
        cursor.close()


def init_database(url: str) -> None:
    """Create all ledger tables."""
    Base.metadata.create_all(bind=get_engine(url))
    logger.info('Run ledger initialized at %s', url)


def drop_database(url: str) -> None:
    """Drop all ledger tables."""
    Base.metadata.drop_all(bind=get_engine(url))
    logger.info('Run ledger dropped at %s', url)


@contextmanager
def get_db(url: str) -> Generator[Session, None, None]:
    """Session context manager: commit on success, roll back on error."""
    get_engine(url)
    db = _sessions[url]()
    try:
        yield db
        db.commit()
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
