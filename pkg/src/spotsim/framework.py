"""Application-centric provisioning pieces used by the ACC scheme.

Covers the application definition document, the application lifecycle
state machine, the spot workflows run against a mock provider, the
monitor's decision-point event stream, and the greedy bid / instance-type
selection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import yaml

from spotsim.config import HOUR, JobSpec
from spotsim.errors import (
    ConfigError,
    DoesNotTerminate,
    NeverAvailableError,
    NoFeasibleOfferError,
    StateMachineError,
)
from spotsim.failure import EetInputs, eet, estimate_pdf
from spotsim.money import format_usd, to_micros, to_usd
from spotsim.trace import PriceTrace

# --- lifecycle -------------------------------------------------------------


class AppState(enum.Enum):
    NEW = "New"
    INACTIVE = "Inactive"
    ACTIVE = "Active"
    UNBALANCED = "Unbalanced"
    UNREACHABLE = "Unreachable"
    TERMINATED = "Terminated"


TRANSITIONS = frozenset(
    {
        (AppState.NEW, AppState.INACTIVE),
        (AppState.INACTIVE, AppState.ACTIVE),
        (AppState.ACTIVE, AppState.INACTIVE),
        (AppState.ACTIVE, AppState.UNBALANCED),
        (AppState.UNBALANCED, AppState.ACTIVE),
        (AppState.ACTIVE, AppState.UNREACHABLE),
        (AppState.UNREACHABLE, AppState.ACTIVE),
        (AppState.INACTIVE, AppState.TERMINATED),
        (AppState.ACTIVE, AppState.TERMINATED),
    }
)


def can_transition(src: AppState, dst: AppState) -> bool:
    return (src, dst) in TRANSITIONS


def transition(src: AppState, dst: AppState) -> AppState:
    if not can_transition(src, dst):
        raise StateMachineError(f"illegal transition {src.value} -> {dst.value}")
    return dst


# --- workflows against a mock provider -------------------------------------


class Workflow(enum.Enum):
    START = "W_start"
    CKPT = "W_ckpt"
    TERMINATE = "W_terminate"
    LAUNCH = "W_launch"


WORKFLOW_ACTIONS = {
    Workflow.START: ("launch_spot", "mount_volume", "copy_job", "start_job"),
    Workflow.CKPT: ("save_results",),
    Workflow.TERMINATE: ("terminate_spot",),
    Workflow.LAUNCH: ("launch_spot", "mount_volume", "resume_tasks"),
}

# workflow -> (state it must run from, state it leaves the app in)
_WORKFLOW_STATES = {
    Workflow.START: (AppState.INACTIVE, AppState.ACTIVE),
    Workflow.CKPT: (AppState.ACTIVE, AppState.ACTIVE),
    Workflow.TERMINATE: (AppState.ACTIVE, AppState.UNREACHABLE),
    Workflow.LAUNCH: (AppState.UNREACHABLE, AppState.ACTIVE),
}


class MockProviderLog:
    """Append-only record of provider actions, in place of real API calls."""

    def __init__(self):
        self._entries = []

    def append(self, time: int, action: str):
        self._entries.append((time, action))

    @property
    def entries(self) -> tuple:
        return tuple(self._entries)

    @property
    def actions(self) -> tuple:
        return tuple(a for _, a in self._entries)

    def __len__(self):
        return len(self._entries)


@dataclass
class SpotApplication:
    """Runtime side of an application: lifecycle state plus provider log."""

    state: AppState = AppState.NEW
    provider: MockProviderLog = field(default_factory=MockProviderLog)

    def move(self, dst: AppState):
        self.state = transition(self.state, dst)


def run_workflow(workflow, app: SpotApplication, time: int = 0) -> MockProviderLog:
    workflow = Workflow(workflow)
    src, dst = _WORKFLOW_STATES[workflow]
    if app.state is not src:
        raise StateMachineError(
            f"{workflow.value} needs state {src.value}, application is {app.state.value}"
        )
    for action in WORKFLOW_ACTIONS[workflow]:
        app.provider.append(time, action)
    if dst is not src:
        app.move(dst)
    return app.provider


def replay_run(result) -> SpotApplication:
    """Drive a fresh application through the workflows implied by a
    simulation's event log."""
    app = SpotApplication()
    app.move(AppState.INACTIVE)
    for ev in result.events:
        if ev.kind == "launch":
            run_workflow(Workflow.START, app, ev.time)
        elif ev.kind == "checkpoint_begin":
            run_workflow(Workflow.CKPT, app, ev.time)
        elif ev.kind == "user_terminate":
            run_workflow(Workflow.TERMINATE, app, ev.time)
        elif ev.kind == "provider_kill":
            app.move(AppState.UNREACHABLE)
        elif ev.kind == "relaunch":
            run_workflow(Workflow.LAUNCH, app, ev.time)
        elif ev.kind == "job_complete":
            app.provider.append(ev.time, "terminate_spot")
            app.move(AppState.TERMINATED)
    return app


# --- decision points and event generation ----------------------------------


def decision_points(t_h: int, t_c: int, t_w: int):
    """Checkpoint and terminate decision instants before hour boundary ``t_h``."""
    if t_c < 0 or t_w < 0:
        raise ConfigError("t_c and t_w must be non-negative")
    if t_c + t_w >= HOUR:
        raise ConfigError("t_c + t_w must be below one hour")
    if t_c + t_w == 0:
        raise ConfigError("t_c + t_w = 0 puts both decision points on the boundary")
    return t_h - t_c - t_w, t_h - t_w


def generate_events(trace: PriceTrace, a_bid, job: JobSpec, anchor: int) -> list:
    """Monitor events for an instance launched at ``anchor`` that is never
    revoked by the provider.

    Returns ``(time, kind)`` pairs with kinds ``E_ckpt``, ``E_terminate`` and
    ``E_launch``.  ``E_terminate`` needs the price to be above the bid at
    both the checkpoint and the terminate decision points of the same hour.
    """
    bid = a_bid if isinstance(a_bid, int) else to_micros(a_bid)
    horizon = trace.horizon_end
    out = []
    launch = anchor
    while launch is not None:
        k = 1
        terminated_at = None
        while True:
            t_cd, t_td = decision_points(launch + k * HOUR, job.t_c, job.t_w)
            if t_cd >= horizon:
                break
            ckpt = trace.micros_at(t_cd) > bid
            if ckpt:
                out.append((t_cd, "E_ckpt"))
            if t_td >= horizon:
                break
            if ckpt and trace.micros_at(t_td) > bid:
                out.append((t_td, "E_terminate"))
                terminated_at = t_td
                break
            k += 1
        launch = None
        if terminated_at is not None:
            t = terminated_at + job.relaunch_poll
            while t < horizon:
                if trace.micros_at(t) < bid:
                    out.append((t, "E_launch"))
                    launch = t
                    break
                t += job.relaunch_poll
    return out


# --- offers and bid / type selection ---------------------------------------


@dataclass(frozen=True)
class ServiceOffer:
    provider: str
    instance_type: str
    zone: str
    on_demand_rate: int  # micro-dollars per hour
    capabilities: dict
    history: PriceTrace

    def __post_init__(self):
        if self.on_demand_rate <= 0:
            raise ConfigError(f"{self.instance_type}: on-demand rate must be positive")


@dataclass(frozen=True)
class SlaPolicy:
    """Minimum capability vector; an offer meets it by dominating every entry."""

    minimums: dict

    def met_by(self, offer: ServiceOffer) -> bool:
        caps = offer.capabilities
        return all(k in caps and caps[k] >= v for k, v in self.minimums.items())

    @classmethod
    def parse(cls, text: str) -> "SlaPolicy":
        mins = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, value = part.partition("=")
            if not sep:
                raise ConfigError(f"bad SLA term {part!r}; expected key=value")
            try:
                mins[key.strip()] = float(value)
            except ValueError:
                raise ConfigError(f"bad SLA value in {part!r}") from None
        return cls(mins)


@dataclass(frozen=True)
class Selection:
    a_bid: int
    instance_type: str
    eet_table: dict  # instance_type -> expected seconds (inf when unbounded)
    diagnostics: dict = field(default_factory=dict)


def select_bid_and_type(offers, sla: SlaPolicy, w: int, r: int, bucket_width: int = 60) -> Selection:
    """Greedy choice: bid the cheapest on-demand rate among SLA-meeting
    offers, then take the type with the smallest expected execution time.

    Ties go to the lower on-demand rate, then the type name.
    """
    feasible = [o for o in offers if sla.met_by(o)]
    if not feasible:
        raise NoFeasibleOfferError("no offer meets the SLA")
    types = [o.instance_type for o in feasible]
    if len(set(types)) != len(types):
        raise ConfigError("instance types must be unique among offers")
    a_bid = min(o.on_demand_rate for o in feasible)
    inputs = EetInputs(w, r)
    table, diag = {}, {}
    for o in feasible:
        try:
            pdf = estimate_pdf(o.history, a_bid, bucket_width)
            table[o.instance_type] = eet(pdf, inputs)
        except (NeverAvailableError, DoesNotTerminate) as exc:
            table[o.instance_type] = math.inf
            diag[o.instance_type] = str(exc)
    finite = [o for o in feasible if math.isfinite(table[o.instance_type])]
    if not finite:
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(diag.items()))
        raise DoesNotTerminate(f"no instance type finishes at bid {to_usd(a_bid)} ({detail})")
    best = min(finite, key=lambda o: (table[o.instance_type], o.on_demand_rate, o.instance_type))
    return Selection(a_bid, best.instance_type, table, diag)


# --- application definition document --------------------------------------


SPOT_EVENTS = ("E_ckpt", "E_terminate", "E_launch")
SPOT_WORKFLOW_MAP = {"W_ckpt": "E_ckpt", "W_terminate": "E_terminate", "W_launch": "E_launch"}


@dataclass(frozen=True)
class ResourceSpec:
    id: str
    provider: str
    type: str
    size: str
    zone: Optional[str] = None


@dataclass(frozen=True)
class EventSpec:
    name: str
    threshold: int  # a_bid, micro-dollars
    resource: str
    bid: Optional[int] = None  # s_bid, only for E_launch


@dataclass(frozen=True)
class WorkflowSpec:
    name: str
    actions: tuple


@dataclass(frozen=True)
class MonitoringSpec:
    events: tuple
    workflows: tuple
    event_map: dict
    workflow_map: dict

    def __post_init__(self):
        names = {e.name for e in self.events}
        for wf in SPOT_WORKFLOW_MAP:
            if wf not in self.workflow_map:
                raise ConfigError(f"workflow_map is missing {wf}")
        for wf, ev in self.workflow_map.items():
            if ev not in names:
                raise ConfigError(f"workflow {wf} maps to unknown event {ev}")


@dataclass(frozen=True)
class ApplicationDefinition:
    tiers: frozenset
    resources: tuple
    resource_map: dict
    policies: dict
    users: frozenset
    monitoring: MonitoringSpec

    def __post_init__(self):
        ids = {r.id for r in self.resources}
        missing = ids - set(self.resource_map)
        if missing:
            raise ConfigError(f"resource_map has no tier for {sorted(missing)}")
        for rid, tier in self.resource_map.items():
            if rid not in ids:
                raise ConfigError(f"resource_map names unknown resource {rid}")
            if tier not in self.tiers:
                raise ConfigError(f"resource {rid} maps to unknown tier {tier}")
        for ev, rid in self.monitoring.event_map.items():
            if rid not in ids and rid not in self.tiers:
                raise ConfigError(f"event {ev} maps to unknown resource/tier {rid}")

    def event(self, name: str) -> EventSpec:
        for e in self.monitoring.events:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def a_bid(self) -> int:
        return self.event("E_ckpt").threshold

    @property
    def s_bid(self) -> Optional[int]:
        return self.event("E_launch").bid

    @property
    def spot_resource(self) -> ResourceSpec:
        rid = self.monitoring.event_map.get("E_launch")
        for r in self.resources:
            if r.id == rid:
                return r
        raise ConfigError("E_launch is not mapped to a resource")


def spot_application(instance_type: str, a_bid, s_bid=None, zone=None, sla=None, users=()) -> ApplicationDefinition:
    """The single-tier spot job definition: one spot instance and one 1 GB
    volume, the three spot events and four workflows."""
    a = to_micros(a_bid)
    s = None if s_bid is None else to_micros(s_bid)
    resources = (
        ResourceSpec("r1", "ec2", "spot_instance", instance_type, zone),
        ResourceSpec("r2", "ec2", "ebs", "1GB", zone),
    )
    events = (
        EventSpec("E_ckpt", a, "r1"),
        EventSpec("E_terminate", a, "r1"),
        EventSpec("E_launch", a, "r1", s),
    )
    workflows = tuple(WorkflowSpec(w.value, WORKFLOW_ACTIONS[w]) for w in Workflow)
    return ApplicationDefinition(
        tiers=frozenset({"t1"}),
        resources=resources,
        resource_map={"r1": "t1", "r2": "t1"},
        policies={"sla": dict(sla or {})},
        users=frozenset(users),
        monitoring=MonitoringSpec(
            events=events,
            workflows=workflows,
            event_map={e.name: "r1" for e in events},
            workflow_map=dict(SPOT_WORKFLOW_MAP),
        ),
    )


def application_to_dict(app: ApplicationDefinition) -> dict:
    return {
        "tiers": sorted(app.tiers),
        "resources": [
            {k: v for k, v in vars(r).items() if v is not None} for r in app.resources
        ],
        "resource_map": dict(app.resource_map),
        "policies": app.policies,
        "users": sorted(app.users),
        "monitoring": {
            "events": {
                e.name: {
                    "threshold": format_usd(e.threshold),
                    **({"bid": format_usd(e.bid)} if e.bid is not None else {}),
                }
                for e in app.monitoring.events
            },
            "workflows": [w.name for w in app.monitoring.workflows],
            "event_map": dict(app.monitoring.event_map),
            "workflow_map": dict(app.monitoring.workflow_map),
        },
    }


def application_from_dict(doc: dict) -> ApplicationDefinition:
    try:
        mon = doc["monitoring"]
        resources = tuple(
            ResourceSpec(
                str(r["id"]), str(r["provider"]), str(r["type"]), str(r["size"]),
                None if r.get("zone") is None else str(r["zone"]),
            )
            for r in doc["resources"]
        )
        events = []
        for name, spec in mon["events"].items():
            spec = spec or {}
            events.append(
                EventSpec(
                    name,
                    to_micros(str(spec["threshold"])),
                    str(mon.get("event_map", {}).get(name, "")),
                    None if spec.get("bid") is None else to_micros(str(spec["bid"])),
                )
            )
        workflows = []
        for name in mon.get("workflows", []):
            try:
                workflows.append(WorkflowSpec(name, WORKFLOW_ACTIONS[Workflow(name)]))
            except ValueError:
                raise ConfigError(f"unknown workflow {name!r}") from None
        monitoring = MonitoringSpec(
            events=tuple(events),
            workflows=tuple(workflows),
            event_map=dict(mon.get("event_map", {})),
            workflow_map=dict(mon.get("workflow_map", {})),
        )
        return ApplicationDefinition(
            tiers=frozenset(doc["tiers"]),
            resources=resources,
            resource_map=dict(doc["resource_map"]),
            policies=dict(doc.get("policies") or {}),
            users=frozenset(doc.get("users") or ()),
            monitoring=monitoring,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad application definition: {exc}") from exc


def load_application(path) -> ApplicationDefinition:
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return application_from_dict(doc)


def dump_application(app: ApplicationDefinition) -> str:
    return yaml.safe_dump(application_to_dict(app), sort_keys=False)
