from src.logger_utils import ColoredLogger as log


def test_quiet_suppresses_console(capsys):
    log.log("dp", "hidden", 'INFO')
    assert capsys.readouterr().out == ""


def test_scope_prefix_and_file_log(tmp_path, capsys):
    log.set_quiet(False)
    log.log("backtest", "ranked 12 assets", 'SUCCESS')
    out = capsys.readouterr().out
    assert "[BACKTEST]" in out
    assert "ranked 12 assets" in out

    target = tmp_path / "run.log"
    log.enable_file_logging(str(target))
    try:
        log.log_status("finished", 'SUCCESS')
        for handler in log._file_logger.handlers:
            handler.flush()
        text = target.read_text(encoding="utf-8")
        assert "finished" in text
        assert "\x1b[" not in text
    finally:
        for handler in list(log._file_logger.handlers):
            handler.close()
            log._file_logger.removeHandler(handler)
        log._file_logger = None
        log._file_logging_enabled = False


def test_stage_line(capsys):
    log.set_quiet(False)
    log.log_stage("simulate", 5, 7, 'COMPLETED', 1.5)
    out = capsys.readouterr().out
    assert "Stage 5/7" in out
    assert "(1.50s)" in out
