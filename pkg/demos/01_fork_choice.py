"""Walk through the fork choice on a hand-built DAG.

Two validators spend the same coin in slot 2.  One spend sits on top of both
slot-1 blocks, the other only on one of them, so the first carries more
window weight and wins.  A later block on the winner then becomes the only
tip, and the losing spend never enters the ledger order.
"""
from dagpos import dag as D
from dagpos.dag import DagView, Payload, new_block

W = 30

v = DagView()
g = v.genesis
a = new_block(1, 1, [g], y=0.3)
b = new_block(1, 2, [g], y=0.7)
spend1 = new_block(2, 3, [a.id, b.id], y=0.5, payload=Payload.of(tx_id=1, conflict_key=9))
spend2 = new_block(2, 4, [b.id], y=0.6, payload=Payload.of(tx_id=2, conflict_key=9))
for blk in (a, b, spend1, spend2):
    D.insert_block(v, blk)

name = {g: "G", a.id: "A", b.id: "B", spend1.id: "S1", spend2.id: "S2"}


def show(ids):
    return sorted(name[i] for i in ids)


t = 3
print("tips at slot 3:      ", show(D.tips_w(v, t, W)))
c = D.cca(v, spend1.id, spend2.id)
print("common ancestor:     ", name[c])
print("weight above it:      S1 =", D.subdag_weight(v, spend1.id, c, W, t),
      " S2 =", D.subdag_weight(v, spend2.id, c, W, t))
print("conflict resolution: ", name[D.ctr(v, spend1.id, spend2.id, W, t)])
print("preferred frontier:  ", show(D.preferred_frontier(v, t, W)))

side = new_block(3, 5, [spend1.id], y=0.2, payload=Payload.of(tx_id=3, conflict_key=4))
D.insert_block(v, side)
name[side.id] = "X"
print("\nafter X extends S1:  ", show(D.preferred_frontier(v, 4, W)))
print("ledger order:        ", [name[i] for i in D.linearize(v, g, 4, W)])
print("max antichain, slot 4:", show(D.max_antichain(v, 4, W)))
