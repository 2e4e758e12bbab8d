from .config import ServiceConfig
from .http import AuthorityClient, decode_frames, encode_frames, make_server, serve_in_thread
from .store import (CurveMismatch, InvalidCursor, ReportStore, ServiceError, StoredReport,
                    Unauthorized)

__all__ = [
    "AuthorityClient", "CurveMismatch", "InvalidCursor", "ReportStore", "ServiceConfig",
    "ServiceError", "StoredReport", "Unauthorized", "decode_frames", "encode_frames",
    "make_server", "serve_in_thread",
]
