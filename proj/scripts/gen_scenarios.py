#!/usr/bin/env python3
"""Writes the packaged scenario files under scenarios/.

Highway runs north along +y. Lane centers at x = 0, 3.5, 7.0 with speeds
22, 25 and 28 m/s; same-lane spacing is at least 50 m.
"""
import copy
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "scenarios"
LANES = [0.0, 3.5, 7.0]
SPEEDS = [22.0, 25.0, 28.0]

VEHICLE_SENSORS = [
    {"id": 0, "type": "lidar", "range": 100, "aperture": 120, "mount": [0, 2]},
    {"id": 1, "type": "camera", "range": 60, "aperture": 60, "mount": [0, 1.5]},
]
RSU_SENSORS = [{"id": 0, "type": "lidar", "range": 80, "aperture": 360}]


def car(eid, lane, y, station=None, sensors=None):
    e = {"id": eid, "kind": "connected_vehicle" if station else "non_connected_vehicle",
         "position": [LANES[lane], y], "heading": 0, "speed": SPEEDS[lane]}
    if station:
        e["station"] = {"id": station}
        e["sensors"] = copy.deepcopy(sensors if sensors is not None else VEHICLE_SENSORS)
    return e


def base(name, description, duration_ms, entities, **extra):
    doc = {
        "format": "cpsim-scenario",
        "version": 1,
        "name": name,
        "description": description,
        "duration_ms": duration_ms,
        "tick_ms": 100,
        "seed": 1,
        "noise": {"sigma_pos": 0.2, "sigma_speed": 0.1, "truncation_sigmas": 3},
        "channel": {"capacity_bytes_per_window": 400000, "window_ms": 1000, "loss_rate": 0.0},
        "jitter": {"position": 5.0, "speed": 0.2},
        "entities": entities,
        "attacks": [],
        "detectors": {"enabled": "all", "reporting_threshold": 0.5},
    }
    doc.update(extra)
    return doc


def clean_highway():
    ents = [
        car(1, 0, 0, station=1),
        car(101, 0, 55),
        car(2, 0, 110, station=2),
        car(8, 0, 170, station=8),
        car(3, 1, 20, station=3),
        car(102, 1, 75),
        car(4, 1, 130, station=4),
        car(6, 2, -40, station=6),
        car(5, 2, 30, station=5),
        car(103, 2, 90),
        {"id": 7, "kind": "rsu", "position": [13.0, 420.0], "heading": 0,
         "station": {"id": 7}, "sensors": copy.deepcopy(RSU_SENSORS)},
        {"id": 200, "kind": "non_connected_vehicle", "position": [-4.5, 700.0], "heading": 0,
         "speed": 0, "length": 12.0, "width": 2.5},
        {"id": 301, "kind": "pedestrian", "position": [14.5, 380.0], "heading": 0, "speed": 1.4},
        {"id": 302, "kind": "pedestrian", "position": [15.5, 460.0], "heading": 180, "speed": 1.2},
        {"id": 303, "kind": "animal", "position": [-9.0, 900.0], "heading": 90, "speed": 0.0},
    ]
    return base("clean_highway", "Three-lane highway, eight stations, no attacks.", 60000, ents)


def small_highway():
    """Four connected vehicles and three non-connected ones; attack scenarios build on it."""
    return [
        car(1, 0, 0, station=1),
        car(101, 0, 55),
        car(2, 1, 20, station=2),
        car(102, 1, 80),
        car(3, 2, -30, station=3),
        car(103, 2, 40),
        car(4, 0, 120, station=4),
    ]


def attack_doc(attack_id, attacks, entities=None, duration_ms=6000, description="", **extra):
    ents = entities if entities is not None else small_highway()
    doc = base(attack_id.lower(), description or f"{attack_id} on the four-station highway.", duration_ms, ents, **extra)
    doc["attacks"] = attacks
    return doc


def attack(aid, attacker=0, victim=None, start=1000, stop=None, params=None, profile=None):
    a = {"id": aid, "start_ms": start}
    if attacker:
        a["attacker"] = attacker
    if victim is not None:
        a["victim"] = victim
    if stop is not None:
        a["stop_ms"] = stop
    if params:
        a["params"] = params
    if profile:
        a["profile"] = profile
    return a


def t3e_entities():
    """Victim whose camera is its primary sensor, so painted-target skew reaches its CPMs."""
    ents = small_highway()
    ents[0]["sensors"] = list(reversed(copy.deepcopy(VEHICLE_SENSORS)))
    return ents


def t3k_entities():
    # Attacker 2 in lane 1; non-connected car 101 25 m ahead of it in lane 0
    # is in plain view of station 1 from the start.
    return [
        car(1, 0, 0, station=1),
        car(101, 0, 45),
        car(2, 1, 20, station=2),
        car(3, 2, -30, station=3),
        car(4, 2, 60, station=4),
    ]


def fig4_entities():
    # Victim 1 alone ahead in lane 0; attacker 3 trails in lane 2.
    return [
        car(1, 0, 0, station=1),
        car(3, 2, -60, station=3),
        car(2, 1, -40, station=2),
    ]


def sweep_entities():
    ents = small_highway()
    ents += [car(5, 1, -60, station=5), car(6, 2, 100, station=6), car(104, 2, 160)]
    return ents


SCENARIOS = {}


def add(path, doc):
    SCENARIOS[path] = doc


def build():
    add("clean_highway.json", clean_highway())

    add("attacks/t3_a.json", attack_doc("T3_A", [attack("T3_A", attacker=2)]))
    add("attacks/t3_b.json", attack_doc("T3_B", [attack("T3_B", attacker=2)]))
    add("attacks/t3_c.json", attack_doc("T3_C", [attack("T3_C", victim=1, params={"segment_objects": 1})]))
    add("attacks/t3_d.json", attack_doc("T3_D", [attack("T3_D", params={"position": [1.5, 160.0]},
                                                        profile={"membership": "external"})]))
    add("attacks/t3_e.json", attack_doc("T3_E", [attack("T3_E", victim=1, params={"magnitude_deg": 15})],
                                 entities=t3e_entities()))
    add("attacks/t3_f.json", attack_doc("T3_F", [attack("T3_F", params={"waypoints": [[-3, 100], [-3, 140]], "speed": 1.5},
                                                        profile={"membership": "external"})]))
    add("attacks/t3_g.json", attack_doc("T3_G", [attack("T3_G", params={"target": 101, "period_ms": 300},
                                                        profile={"membership": "external"})]))
    add("attacks/t3_h.json", attack_doc("T3_H", [attack("T3_H", attacker=2)], attestation=False))
    add("attacks/t3_h_attested.json", attack_doc("T3_H", [attack("T3_H", attacker=2)], attestation=True,
                                                 description="T3_H with attested sensor capabilities."))
    SCENARIOS["attacks/t3_h_attested.json"]["name"] = "t3_h_attested"
    add("attacks/t3_i.json", attack_doc("T3_I", [attack("T3_I", attacker=2)]))
    add("attacks/t3_k.json", attack_doc("T3_K", [attack("T3_K", attacker=2)], entities=t3k_entities()))
    add("attacks/t3_l.json", attack_doc("T3_L", [attack("T3_L", victim=1, profile={"membership": "external"})],
                               duration_ms=8000))
    add("attacks/t3_m.json", attack_doc("T3_M", [attack("T3_M", attacker=2, start=2500, params={"factor": 20})]))
    add("attacks/t3_n.json", attack_doc("T3_N", [attack("T3_N", victim=1, params={"bias": [0, 20]},
                                                        profile={"membership": "external"})]))
    add("attacks/t4_a.json", attack_doc("T4_A", [attack("T4_A", attacker=2, params={"target": 102})]))
    add("attacks/t4_b.json", attack_doc("T4_B", [attack("T4_B", victim=1, params={"offset_ms": 500},
                                                        profile={"membership": "external"})]))
    add("attacks/t4_c.json", attack_doc("T4_C", [attack("T4_C", params={"position": [-4.5, 200.0], "length": 12, "width": 2.5},
                                                        profile={"membership": "external"})]))
    add("attacks/fig4_eebl.json", attack_doc("FIG4_EEBL", [attack("FIG4_EEBL", attacker=3, victim=1, start=1000, stop=7000)],
                                             entities=fig4_entities(), duration_ms=8000,
                                             description="Composite EEBL attack: ghosts, then an emergency brake DENM."))
    add("attacks/fig4_eebl_undefended.json",
        attack_doc("FIG4_EEBL", [attack("FIG4_EEBL", attacker=3, victim=1, start=1000, stop=7000)],
                   entities=fig4_entities(), duration_ms=8000,
                   description="Composite EEBL attack with every detector off."))
    d = SCENARIOS["attacks/fig4_eebl_undefended.json"]
    d["name"] = "fig4_eebl_undefended"
    d["detectors"] = {"enabled": []}

    sweep = attack_doc("T3_B", [attack("T3_B", attacker=2, start=1500)], entities=sweep_entities(), duration_ms=8000,
                       description="Ghost with a reused object id; base for the redundancy threshold sweep.")
    sweep["name"] = "redundancy_sweep"
    sweep["channel"]["capacity_bytes_per_window"] = 40000
    sweep["redundancy"] = {"enabled": True, "mode": "frequency", "cbr_threshold": 1.0, "window_ms": 1100}
    add("redundancy_sweep.json", sweep)


def main():
    build()
    for rel, doc in SCENARIOS.items():
        p = ROOT / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {len(SCENARIOS)} scenarios")


if __name__ == "__main__":
    main()
