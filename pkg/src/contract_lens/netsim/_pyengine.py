"""Pure-Python packet engine (reference and fallback for the compiled core).

The event order is the total order ``(time_ns, sequence)``, so two runs with the
same inputs replay the same history.  ``_cengine.pyx`` implements exactly the
same transitions and is checked against this module by the test-suite.

Topology model: a flow's packets wait ``fwd_delay`` ns (access propagation plus
any noise hop), cross the links of ``path`` in order (links have no
propagation of their own), and each delivery returns an ACK ``ack_delay`` ns
later over an uncongested reverse path.  Drop-tail drops return a loss
notification over the same reverse path.
"""
from __future__ import annotations

import heapq
from collections import deque

EV_ARRIVE = 0
EV_TXDONE = 1
EV_ACK = 2
EV_NACK = 3
EV_SAMPLE = 4
EV_START = 5

# golden-ratio step used to dither fractional windows across ACKs
DITHER_STEP = 0.6180339887498949


class PyEngine:
    """Event loop over links, packets and per-flow controllers.

    ``ccas[i]`` must expose ``per_ack`` (bool), ``cwnd`` (bytes, float) and
    either ``on_ack(now, rtt, ecn, lost, hop_delay)`` or
    ``on_interval(now, min_rtt, min_hop, acks, marks, losses)`` together with
    an integer ``next_update`` attribute.
    """

    def __init__(self, link_ser, link_buffer, link_red, link_rng,
                 flow_paths, flow_fwd, flow_ack, ccas, packet_size,
                 duration, warmup, sample_interval=0, trace=False, max_burst=64,
                 flow_start=None):
        self.link_ser = [int(v) for v in link_ser]
        self.link_buffer = [int(v) for v in link_buffer]
        self.link_red = list(link_red)
        self.link_rng = list(link_rng)
        self.flow_paths = [tuple(int(l) for l in p) for p in flow_paths]
        self.flow_fwd = [int(v) for v in flow_fwd]
        self.flow_ack = [int(v) for v in flow_ack]
        self.ccas = list(ccas)
        self.packet_size = int(packet_size)
        self.duration = int(duration)
        self.warmup = int(warmup)
        self.sample_interval = int(sample_interval)
        self.trace_on = bool(trace)
        self.max_burst = int(max_burst)
        self.flow_start = [0] * len(self.flow_paths) if flow_start is None else [int(v) for v in flow_start]

    def run(self) -> dict:
        nl = len(self.link_ser)
        nf = len(self.flow_paths)
        pkt = self.packet_size
        duration, warmup = self.duration, self.warmup
        ser, buf = self.link_ser, self.link_buffer
        red, rngs = self.link_red, self.link_rng
        paths, fwd, ackd = self.flow_paths, self.flow_fwd, self.flow_ack
        ccas = self.ccas
        max_burst = self.max_burst
        trace = [] if self.trace_on else None

        heap = []
        evseq = 0

        # packet pool
        p_flow, p_seq, p_send, p_hop = [], [], [], []
        p_ecn, p_qmax, p_enq, p_stamp = [], [], [], []
        free = []

        # link state
        queues = [deque() for _ in range(nl)]
        in_service = [-1] * nl
        qlen = [0] * nl
        arr_count = [0] * nl
        dep_count = [0] * nl
        l_drops = [0] * nl
        fifo_bad = [0] * nl
        max_q = [0] * nl

        # flow state
        per_ack = [bool(c.per_ack) for c in ccas]
        cwnd = [float(c.cwnd) for c in ccas]
        phase = [0.0] * nf
        inflight = [0] * nf
        next_seq = [0] * nf
        sent = [0] * nf
        delivered = [0] * nf
        dropped = [0] * nf
        in_net = [0] * nf
        acked = [0] * nf
        nacked = [0] * nf
        last_delivered_seq = [-1] * nf
        order_bad = [0] * nf
        w_sent = [0] * nf
        w_bytes = [0] * nf
        w_acks = [0] * nf
        w_marks = [0] * nf
        w_losses = [0] * nf
        w_hop_sum = [0] * nf
        rtt_samples = [[] for _ in range(nf)]
        acc_rtt = [-1] * nf
        acc_hop = [-1] * nf
        acc_acks = [0] * nf
        acc_marks = [0] * nf
        acc_losses = [0] * nf

        s_times, s_cwnd, s_qlen = [], [], []

        def push(t, kind, arg):
            nonlocal evseq
            heapq.heappush(heap, (t, evseq, kind, arg))
            evseq += 1

        def send_burst(f, now):
            limit = int(cwnd[f] / pkt + phase[f])
            if limit < 1:
                limit = 1
            n = 0
            while inflight[f] < limit and n < max_burst:
                if free:
                    p = free.pop()
                    p_flow[p] = f
                    p_seq[p] = next_seq[f]
                    p_send[p] = now
                    p_hop[p] = 0
                    p_ecn[p] = 0
                    p_qmax[p] = 0
                else:
                    p = len(p_flow)
                    p_flow.append(f)
                    p_seq.append(next_seq[f])
                    p_send.append(now)
                    p_hop.append(0)
                    p_ecn.append(0)
                    p_qmax.append(0)
                    p_enq.append(0)
                    p_stamp.append(0)
                if trace is not None:
                    trace.append((now, f, "send", next_seq[f], -1, cwnd[f]))
                next_seq[f] += 1
                inflight[f] += 1
                sent[f] += 1
                in_net[f] += 1
                if now >= warmup:
                    w_sent[f] += 1
                push(now + fwd[f], EV_ARRIVE, p)
                n += 1

        def start_tx(l, now):
            p = queues[l].popleft()
            in_service[l] = p
            wait = now - p_enq[p]
            if wait > p_qmax[p]:
                p_qmax[p] = wait
            if p_stamp[p] != dep_count[l]:
                fifo_bad[l] += 1
            dep_count[l] += 1
            push(now + ser[l], EV_TXDONE, l)

        def arrive(p, now):
            f = p_flow[p]
            l = paths[f][p_hop[p]]
            if buf[l] >= 0 and qlen[l] >= buf[l]:
                l_drops[l] += 1
                dropped[f] += 1
                in_net[f] -= 1
                if trace is not None:
                    trace.append((now, f, "drop", p_seq[p], -1, cwnd[f]))
                push(now + ackd[f], EV_NACK, p)
                return
            r = red[l]
            if r is not None:
                kmin, kmax, maxp = r
                q = qlen[l]
                if q >= kmax:
                    prob = maxp
                elif q <= kmin:
                    prob = 0.0
                else:
                    prob = maxp * (q - kmin) / (kmax - kmin)
                if prob > 0.0 and rngs[l].random() < prob:
                    if not p_ecn[p] and trace is not None:
                        trace.append((now, f, "mark", p_seq[p], -1, cwnd[f]))
                    p_ecn[p] = 1
            p_enq[p] = now
            p_stamp[p] = arr_count[l]
            arr_count[l] += 1
            queues[l].append(p)
            qlen[l] += 1
            if qlen[l] > max_q[l]:
                max_q[l] = qlen[l]
            if in_service[l] < 0:
                start_tx(l, now)

        for f in range(nf):
            push(self.flow_start[f], EV_START, f)
        if self.sample_interval > 0:
            push(0, EV_SAMPLE, 0)

        events = 0
        now = 0
        while heap:
            t, _, kind, arg = heap[0]
            if t > duration:
                break
            heapq.heappop(heap)
            now = t
            events += 1
            if kind == EV_ARRIVE:
                arrive(arg, now)
            elif kind == EV_TXDONE:
                l = arg
                p = in_service[l]
                in_service[l] = -1
                qlen[l] -= 1
                p_hop[p] += 1
                f = p_flow[p]
                if p_hop[p] == len(paths[f]):
                    delivered[f] += 1
                    in_net[f] -= 1
                    if p_seq[p] <= last_delivered_seq[f]:
                        order_bad[f] += 1
                    last_delivered_seq[f] = p_seq[p]
                    if now >= warmup:
                        w_bytes[f] += pkt
                    push(now + ackd[f], EV_ACK, p)
                else:
                    arrive(p, now)
                if queues[l]:
                    start_tx(l, now)
            elif kind == EV_ACK or kind == EV_NACK:
                p = arg
                f = p_flow[p]
                inflight[f] -= 1
                lost = kind == EV_NACK
                if lost:
                    nacked[f] += 1
                    rtt = -1
                    ecn = 0
                    hop = 0
                else:
                    acked[f] += 1
                    rtt = now - p_send[p]
                    ecn = p_ecn[p]
                    hop = p_qmax[p]
                if now >= warmup:
                    if lost:
                        w_losses[f] += 1
                    else:
                        w_acks[f] += 1
                        w_marks[f] += ecn
                        w_hop_sum[f] += hop
                        rtt_samples[f].append(rtt)
                cca = ccas[f]
                if per_ack[f]:
                    cwnd[f] = float(cca.on_ack(now, rtt, ecn, lost, hop))
                else:
                    if lost:
                        acc_losses[f] += 1
                    else:
                        acc_acks[f] += 1
                        acc_marks[f] += ecn
                        if acc_rtt[f] < 0 or rtt < acc_rtt[f]:
                            acc_rtt[f] = rtt
                        if acc_hop[f] < 0 or hop < acc_hop[f]:
                            acc_hop[f] = hop
                    if acc_acks[f] > 0 and now >= cca.next_update:
                        cwnd[f] = float(cca.on_interval(now, acc_rtt[f], acc_hop[f], acc_acks[f],
                                                        acc_marks[f], acc_losses[f]))
                        acc_rtt[f] = -1
                        acc_hop[f] = -1
                        acc_acks[f] = 0
                        acc_marks[f] = 0
                        acc_losses[f] = 0
                if trace is not None and not lost:
                    trace.append((now, f, "ack", p_seq[p], rtt, cwnd[f], hop))
                free.append(p)
                ph = phase[f] + DITHER_STEP
                if ph >= 1.0:
                    ph -= 1.0
                phase[f] = ph
                send_burst(f, now)
            elif kind == EV_SAMPLE:
                s_times.append(now)
                s_cwnd.append(list(cwnd))
                s_qlen.append(list(qlen))
                push(now + self.sample_interval, EV_SAMPLE, 0)
            else:
                send_burst(arg, now)

        return {
            "end_time": now,
            "events": events,
            "flows": {
                "sent": sent, "delivered": delivered, "dropped": dropped,
                "in_network": in_net, "acked": acked, "nacked": nacked,
                "inflight": inflight, "cwnd": cwnd, "order_violations": order_bad,
                "w_sent": w_sent, "w_bytes": w_bytes, "w_acks": w_acks,
                "w_marks": w_marks, "w_losses": w_losses, "w_hop_sum": w_hop_sum,
                "rtt_samples": rtt_samples,
            },
            "links": {
                "arrivals": arr_count, "departures": dep_count, "drops": l_drops,
                "fifo_violations": fifo_bad, "max_queue": max_q, "queue": list(qlen),
            },
            "samples": {"time": s_times, "cwnd": s_cwnd, "qlen": s_qlen},
            "trace": trace,
        }
