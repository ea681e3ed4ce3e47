"""Hazard-management toolkit for guarded human-robot workflows.

The package ties together four layers:

* :mod:`hazgate.model` -- a line-oriented DSL for guarded activity-diagram
  process models, plus validation, serialization and graph queries.
* :mod:`hazgate.executive` -- a timed safety executive that runs a process
  model as an event-driven state machine with interlocks, protective stops,
  stabilization windows, confirmation ledgers and an append-only session log.
* :mod:`hazgate.shard` / :mod:`hazgate.stpa` -- guideword deviation
  worksheets and unsafe-control-action catalogs with requirement
  traceability.
* :mod:`hazgate.simulate` / :mod:`hazgate.campaign` / :mod:`hazgate.reach`
  -- scenario scripting, fault/user-error injection, trace monitors,
  randomized campaigns and a bounded exhaustive reachability oracle.
"""

__version__ = "0.1.0"
