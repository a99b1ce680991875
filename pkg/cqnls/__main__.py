from cqnls.cli import cli

cli(prog_name="cqnls")
