"""
Logging utilities: colored, scope-prefixed console output with optional rotating file log
"""
import logging
import re
import threading
from datetime import datetime
from logging.handlers import RotatingFileHandler


class ColoredLogger:
    """Thread-safe colored logger with stage/module prefixes"""

    # ANSI color codes
    COLORS = {
        'RESET': '\033[0m',
        'RED': '\033[91m',
        'GREEN': '\033[92m',
        'YELLOW': '\033[93m',
        'BLUE': '\033[94m',
        'MAGENTA': '\033[95m',
        'CYAN': '\033[96m',
        'WHITE': '\033[97m',
        'GRAY': '\033[90m',
    }

    # Scope color mapping (rotates through colors)
    SCOPE_COLORS = ['CYAN', 'MAGENTA', 'YELLOW', 'BLUE', 'GREEN']

    LEVEL_COLORS = {
        'INFO': 'WHITE',
        'SUCCESS': 'GREEN',
        'WARNING': 'YELLOW',
        'ERROR': 'RED',
        'DEBUG': 'GRAY'
    }

    _lock = threading.Lock()
    _scope_color_map = {}
    _color_index = 0
    _file_logger = None
    _file_logging_enabled = False
    _quiet = False

    @classmethod
    def enable_file_logging(cls, log_file="momentum.log", max_bytes=10*1024*1024, backup_count=5):
        """Enable logging to file with rotation"""
        if cls._file_logger is None:
            cls._file_logger = logging.getLogger('MomentumLogger')
            cls._file_logger.setLevel(logging.INFO)

            # Rotating file handler (10MB per file, keep 5 backups)
            handler = RotatingFileHandler(
                log_file,
                maxBytes=max_bytes,
                backupCount=backup_count,
                encoding='utf-8'
            )
            handler.setLevel(logging.INFO)

            # Plain format for file (no colors)
            formatter = logging.Formatter(
                '%(asctime)s | %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            )
            handler.setFormatter(formatter)

            cls._file_logger.addHandler(handler)
            cls._file_logging_enabled = True

    @classmethod
    def set_quiet(cls, quiet=True):
        """Silence console output (file log is unaffected)"""
        cls._quiet = bool(quiet)

    @classmethod
    def _strip_ansi(cls, text):
        """Remove ANSI color codes from text"""
        ansi_escape = re.compile(r'\x1b\[[0-9;]*m')
        return ansi_escape.sub('', text)

    @classmethod
    def _emit(cls, output):
        if not cls._quiet:
            print(output)
        if cls._file_logging_enabled and cls._file_logger:
            cls._file_logger.info(cls._strip_ansi(output))

    @classmethod
    def _get_scope_color(cls, scope):
        """Get consistent color for a scope"""
        if scope not in cls._scope_color_map:
            cls._scope_color_map[scope] = cls.SCOPE_COLORS[cls._color_index % len(cls.SCOPE_COLORS)]
            cls._color_index += 1
        return cls._scope_color_map[scope]

    @classmethod
    def _colorize(cls, text, color):
        """Add color to text"""
        return f"{cls.COLORS.get(color, '')}{text}{cls.COLORS['RESET']}"

    @classmethod
    def _timestamp(cls):
        return cls._colorize(f"[{datetime.now().strftime('%H:%M:%S')}]", 'GRAY')

    @classmethod
    def log(cls, scope, message, level='INFO'):
        """
        Thread-safe logging with scope prefix

        Args:
            scope: Stage or module name (e.g. "dp", "backtest")
            message: Log message
            level: INFO, SUCCESS, WARNING, ERROR, DEBUG
        """
        with cls._lock:
            short_scope = str(scope)[:8].upper()
            scope_str = cls._colorize(f"[{short_scope:8}]", cls._get_scope_color(short_scope))
            message_str = cls._colorize(message, cls.LEVEL_COLORS.get(level, 'WHITE'))
            cls._emit(f"{cls._timestamp()} {scope_str} {message_str}")

    @classmethod
    def log_stage(cls, stage, index, total, status, seconds=None):
        """
        Log stage progress in compact format

        Args:
            stage: Stage name
            index: 1-based stage position
            total: Number of stages
            status: RUNNING, COMPLETED, FAILED, SKIPPED
            seconds: Optional elapsed wall time
        """
        status_colors = {
            'RUNNING': 'CYAN',
            'COMPLETED': 'GREEN',
            'FAILED': 'RED',
            'SKIPPED': 'GRAY'
        }
        with cls._lock:
            short_scope = str(stage)[:8].upper()
            scope_str = cls._colorize(f"[{short_scope:8}]", cls._get_scope_color(short_scope))
            progress_str = cls._colorize(f"Stage {index}/{total}", 'CYAN')
            status_str = cls._colorize(f"{status:9}", status_colors.get(status, 'WHITE'))
            elapsed = cls._colorize(f" ({seconds:.2f}s)", 'GRAY') if seconds is not None else ""
            cls._emit(f"{cls._timestamp()} {scope_str} {progress_str} → {status_str}{elapsed}")

    @classmethod
    def log_status(cls, message, level='INFO'):
        """Log run-wide status (no scope prefix)"""
        level_colors = {
            'INFO': 'CYAN',
            'SUCCESS': 'GREEN',
            'WARNING': 'YELLOW',
            'ERROR': 'RED'
        }
        with cls._lock:
            message_str = cls._colorize(f"📊 {message}", level_colors.get(level, 'CYAN'))
            cls._emit(f"{cls._timestamp()} {message_str}")

    @classmethod
    def log_separator(cls, title=None):
        """Print a separator line"""
        with cls._lock:
            if title:
                cls._emit(f"\n{'='*60}\n  {title}\n{'='*60}")
            else:
                cls._emit(f"{'─'*60}")

    @classmethod
    def log_table(cls, title, frame, max_rows=20):
        """Print a small DataFrame under a title"""
        with cls._lock:
            header = cls._colorize(f"📋 {title}", 'CYAN')
            cls._emit(f"{cls._timestamp()} {header}")
            cls._emit(frame.head(max_rows).to_string())
