"""Stopping complexity on the reference machine.

For a bit string x, a program "stops on x" if it halts after reading exactly
x.  The shortest such program gives an upper estimate of how complex the
moment x is; the summed weight 2^-|p| of all of them is the novelty mass.
With programs capped at 16 bits the mass falls off quickly with length, so
at this scale "novel" mostly means "late": a long history is rarely picked
out by any program short enough to be enumerated.
"""

# %%
from safemix.machine import disassemble
from safemix.novelty import ENDS_IN_ONE, counting_program, k_stop_upper, m_stop_lower, watcher_program, witnesses

for x in ["", "0", "000", "0000", "00000", "10", "0110", "1011001"]:
    k = k_stop_upper(x, 16)
    print(f"{x or '(empty)':10s} shortest {k if k is not None else '-':>3}  mass {m_stop_lower(x, 16):.6f}")

# %%
# The shortest program for three zeros, decoded, next to the generic
# counter, which is longer but works for any length.
best = witnesses("000", 16)[0]
print(best, disassemble(best))
print(len(counting_program(3)), "bits:", disassemble(counting_program(3)))

# %%
# A watcher for the first string ending in 1: the predicate program, cut at
# its first MARK.
w = watcher_program(ENDS_IN_ONE, 1, "0001")
print(len(w), "bits:", disassemble(w))

# %%
# Novelty along a growing history: mass at each prefix.
from safemix.novelty import prefix_masses

x = "0100100010"
for j, m in enumerate(prefix_masses(x, 16)):
    print(f"{x[:j]:12s} {m:.6f}")
