import logging
import os
import sys
from datetime import datetime

class Logger:
    """
    Logger utility for consistent logging across the engine.
    """
    def __init__(self, name: str):
        """
        Initializes the logger with custom settings.
        :param name: Name of the logger (typically the module name).
        """
        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.INFO)

        # Handlers are attached once per logger name
        if self.logger.handlers:
            return

        # Define log format with timestamp
        formatter = logging.Formatter(
            "%(asctime)s | %(levelname)s | %(name)s | %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        )

        # Console handler
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        # File handler, only when a log directory is configured
        log_dir = os.getenv("SRLIMITS_LOG_DIR")
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
            log_filename = os.path.join(log_dir, f"logs_{datetime.now().strftime('%Y-%m-%d')}.log")
            file_handler = logging.FileHandler(log_filename)
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)

        self.logger.propagate = False

    def get_logger(self):
        """
        Returns the configured logger instance.
        """
        return self.logger
