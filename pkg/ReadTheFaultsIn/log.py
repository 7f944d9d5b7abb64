import logging

ROOT_LOGGER = "ReadTheFaultsIn"

def get_logger(source: str) -> logging.Logger:
    name = ROOT_LOGGER
    if source:
        name += "." + ".".join(part for part in source.split("::") if part)

    return logging.getLogger(name)

def log_debug(message, source: str = ""):
    get_logger(source).debug("%s", message)

def log_info(message, source: str = ""):
    get_logger(source).info("%s", message)

def log_warn(message, source: str = ""):
    get_logger(source).warning("%s", message)

def log_error(message, source: str = ""):
    get_logger(source).error("%s", message)

def configure(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
