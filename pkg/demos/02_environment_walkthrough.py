"""
Walking through the tour-construction environment
=================================================

Shows how the wastable capacity and the deactivation threshold evolve
while tours are built, and which actions the masks allow.
"""
import numpy as np

from mdvrp_lab import Instance
from mdvrp_lab.env import (DEPOT, Action, action_masks, init_state, is_terminal,
                           wastable_and_threshold)

# 2 depots, 10 customers of demand 10, capacity 50 -> at most 4 tours
inst = Instance(np.array([[0.0, 0.0], [1.0, 1.0]]),
                np.array([[0.1 * i, 0.5] for i in range(10)]), np.full(10, 10), 50, "walk")
st = init_state(inst)


def show(label):
    eta, thr = wastable_and_threshold(st)
    tours = ", ".join(f"d{t.depot_index}:{t.status.value}/{t.remaining}" for t in st.active)
    print(f"{label:28s} eta={eta:3d} threshold={thr:5.1f} closed={len(st.inactive)} [{tours}]")


show("start")
for c in range(3):
    st.apply(Action(0, c))
show("depot 0 carries 30")
print("  depot allowed for tour 0?", bool(action_masks(st)[0][0]))
st.apply(Action(0, 3))
st.apply(Action(0, DEPOT))
show("tour closed with 10 unused")

# finish greedily: first feasible customer, otherwise close the tour
while not is_terminal(st):
    masks = action_masks(st)
    ti = next(i for i, m in enumerate(masks) if m.any())
    j = int(np.flatnonzero(masks[ti][1:])[0]) + 1 if masks[ti][1:].any() else 0
    st.apply(Action(ti, DEPOT if j == 0 else j - 1))
show("all customers served")
print("partition:", [(t.depot_index, t.visits) for t in st.partition()])
