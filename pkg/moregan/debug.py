import json
import logging

# set a logger for the package, log format is:
# %(asctime)s - %(name)s - %(levelname)s - %(message)s
_log = logging.getLogger(__name__)
_log.setLevel(logging.DEBUG)
console_handler = logging.StreamHandler()
console_handler.setFormatter(logging.Formatter(
    '%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
_log.addHandler(console_handler)

# DebugEnable: print per-sample synthesis and per-step training details if set True
DebugEnable = False


def _render(msg):
    if isinstance(msg, dict):
        return json.dumps(msg, indent=2, ensure_ascii=False)
    return msg


def Debug(msg, *args):
    if DebugEnable:
        _log.debug(_render(msg), *args)


def Info(msg, *args):
    _log.info(_render(msg), *args)


def Warning(msg, *args):
    _log.warning(_render(msg), *args)
