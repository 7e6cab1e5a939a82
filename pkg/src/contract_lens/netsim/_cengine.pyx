# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled packet engine.

Transition-for-transition port of ``_pyengine.PyEngine``; see that module for
the model.  Controllers stay Python objects and are called through the same
hooks, so both engines produce identical histories for identical inputs.
"""
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport int64_t

cdef enum:
    EV_ARRIVE = 0
    EV_TXDONE = 1
    EV_ACK = 2
    EV_NACK = 3
    EV_SAMPLE = 4
    EV_START = 5

# flow counter layout inside fcnt (index * nf + flow)
cdef enum:
    C_INFL = 0
    C_NSEQ = 1
    C_SENT = 2
    C_DELIV = 3
    C_DROP = 4
    C_INNET = 5
    C_ACKED = 6
    C_NACKED = 7
    C_LASTSEQ = 8
    C_ORDER = 9
    C_WSENT = 10
    C_WBYTES = 11
    C_WACKS = 12
    C_WMARKS = 13
    C_WLOSS = 14
    C_WHOP = 15
    C_ARTT = 16
    C_AHOP = 17
    C_AACKS = 18
    C_AMARKS = 19
    C_ALOSS = 20
    N_COUNTERS = 21


cdef double DITHER_STEP = 0.6180339887498949


cdef struct Event:
    int64_t t
    int64_t seq
    int kind
    int arg


cdef inline bint ev_less(Event* a, Event* b) nogil:
    if a.t != b.t:
        return a.t < b.t
    return a.seq < b.seq


cdef class _Heap:
    cdef Event* data
    cdef Py_ssize_t n, cap

    def __cinit__(self):
        self.cap = 1024
        self.n = 0
        self.data = <Event*> malloc(self.cap * sizeof(Event))
        if self.data == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.data)

    cdef void push(self, int64_t t, int64_t seq, int kind, int arg) except *:
        cdef Py_ssize_t i, parent
        cdef Event e
        cdef Event* nd
        if self.n == self.cap:
            nd = <Event*> realloc(self.data, 2 * self.cap * sizeof(Event))
            if nd == NULL:
                raise MemoryError()
            self.data = nd
            self.cap *= 2
        e.t = t
        e.seq = seq
        e.kind = kind
        e.arg = arg
        i = self.n
        self.n += 1
        while i > 0:
            parent = (i - 1) >> 1
            if ev_less(&e, &self.data[parent]):
                self.data[i] = self.data[parent]
                i = parent
            else:
                break
        self.data[i] = e

    cdef Event pop(self):
        cdef Event top = self.data[0]
        cdef Event last
        cdef Py_ssize_t i, child
        self.n -= 1
        if self.n > 0:
            last = self.data[self.n]
            i = 0
            while True:
                child = 2 * i + 1
                if child >= self.n:
                    break
                if child + 1 < self.n and ev_less(&self.data[child + 1], &self.data[child]):
                    child += 1
                if ev_less(&self.data[child], &last):
                    self.data[i] = self.data[child]
                    i = child
                else:
                    break
            self.data[i] = last
        return top


cdef class _IntVec:
    """Growable int64 array used for packet fields and link FIFOs."""
    cdef int64_t* data
    cdef Py_ssize_t n, cap

    def __cinit__(self):
        self.cap = 256
        self.n = 0
        self.data = <int64_t*> malloc(self.cap * sizeof(int64_t))
        if self.data == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.data)

    cdef void append(self, int64_t v) except *:
        cdef int64_t* nd
        if self.n == self.cap:
            nd = <int64_t*> realloc(self.data, 2 * self.cap * sizeof(int64_t))
            if nd == NULL:
                raise MemoryError()
            self.data = nd
            self.cap *= 2
        self.data[self.n] = v
        self.n += 1


cdef class _Fifo:
    """Growable ring buffer of packet ids."""
    cdef int64_t* data
    cdef Py_ssize_t head, n, cap

    def __cinit__(self):
        self.cap = 256
        self.head = 0
        self.n = 0
        self.data = <int64_t*> malloc(self.cap * sizeof(int64_t))
        if self.data == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.data)

    cdef void push(self, int64_t v) except *:
        cdef int64_t* nd
        cdef Py_ssize_t i
        if self.n == self.cap:
            nd = <int64_t*> malloc(2 * self.cap * sizeof(int64_t))
            if nd == NULL:
                raise MemoryError()
            for i in range(self.n):
                nd[i] = self.data[(self.head + i) % self.cap]
            free(self.data)
            self.data = nd
            self.head = 0
            self.cap *= 2
        self.data[(self.head + self.n) % self.cap] = v
        self.n += 1

    cdef int64_t pop(self):
        cdef int64_t v = self.data[self.head]
        self.head = (self.head + 1) % self.cap
        self.n -= 1
        return v


cdef list _col(int64_t* fcnt, Py_ssize_t nf, int idx):
    cdef Py_ssize_t j
    return [fcnt[idx * nf + j] for j in range(nf)]


cdef class CEngine:
    cdef list link_ser_py, link_buffer_py, link_red, link_rng, flow_paths, ccas
    cdef list flow_fwd_py, flow_ack_py, flow_start
    cdef int64_t packet_size, duration, warmup, sample_interval
    cdef int max_burst
    cdef bint trace_on

    def __init__(self, link_ser, link_buffer, link_red, link_rng,
                 flow_paths, flow_fwd, flow_ack, ccas, packet_size,
                 duration, warmup, sample_interval=0, trace=False, max_burst=64,
                 flow_start=None):
        self.link_ser_py = [int(v) for v in link_ser]
        self.link_buffer_py = [int(v) for v in link_buffer]
        self.link_red = list(link_red)
        self.link_rng = list(link_rng)
        self.flow_paths = [tuple(int(l) for l in p) for p in flow_paths]
        self.flow_fwd_py = [int(v) for v in flow_fwd]
        self.flow_ack_py = [int(v) for v in flow_ack]
        self.ccas = list(ccas)
        self.packet_size = int(packet_size)
        self.duration = int(duration)
        self.warmup = int(warmup)
        self.sample_interval = int(sample_interval)
        self.trace_on = bool(trace)
        self.max_burst = int(max_burst)
        self.flow_start = [0] * len(self.flow_paths) if flow_start is None else [int(v) for v in flow_start]

    def run(self):
        cdef Py_ssize_t nl = len(self.link_ser_py)
        cdef Py_ssize_t nf = len(self.flow_paths)
        cdef Py_ssize_t i, l, f, p, h
        cdef int64_t pkt = self.packet_size
        cdef int64_t duration = self.duration
        cdef int64_t warmup = self.warmup
        cdef int64_t now = 0, t, rtt, hop, wait, limit, n, q
        cdef int64_t evseq = 0
        cdef long events = 0
        cdef int kind, ecn
        cdef bint lost
        cdef double prob, kmin, kmax, maxp, ph
        cdef Event ev
        cdef _Heap heap = _Heap()
        cdef list trace = [] if self.trace_on else None
        cdef bint tracing = self.trace_on
        cdef int max_burst = self.max_burst

        # per-link arrays
        cdef int64_t* ser = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef int64_t* buf = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef int64_t* in_service = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef int64_t* qlen = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef int64_t* arr_count = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef int64_t* dep_count = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef int64_t* l_drops = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef int64_t* fifo_bad = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef int64_t* max_q = <int64_t*> malloc(nl * sizeof(int64_t))
        cdef bint* has_red = <bint*> malloc(nl * sizeof(bint))
        cdef double* r_kmin = <double*> malloc(nl * sizeof(double))
        cdef double* r_kmax = <double*> malloc(nl * sizeof(double))
        cdef double* r_maxp = <double*> malloc(nl * sizeof(double))
        cdef list queues = [_Fifo() for _ in range(nl)]
        cdef _Fifo fq

        # per-flow arrays
        cdef int64_t* fwd = <int64_t*> malloc(nf * sizeof(int64_t))
        cdef int64_t* ackd = <int64_t*> malloc(nf * sizeof(int64_t))
        cdef int64_t* path_len = <int64_t*> malloc(nf * sizeof(int64_t))
        cdef int64_t* path_off = <int64_t*> malloc(nf * sizeof(int64_t))
        cdef bint* per_ack = <bint*> malloc(nf * sizeof(bint))
        cdef double* cwnd = <double*> malloc(nf * sizeof(double))
        cdef double* phase = <double*> malloc(nf * sizeof(double))
        cdef int64_t* fcnt = <int64_t*> malloc(nf * N_COUNTERS * sizeof(int64_t))
        cdef _IntVec path_links = _IntVec()

        # packet pool
        cdef _IntVec p_flow = _IntVec()
        cdef _IntVec p_seq = _IntVec()
        cdef _IntVec p_send = _IntVec()
        cdef _IntVec p_hop = _IntVec()
        cdef _IntVec p_ecn = _IntVec()
        cdef _IntVec p_qmax = _IntVec()
        cdef _IntVec p_enq = _IntVec()
        cdef _IntVec p_stamp = _IntVec()
        cdef _IntVec free_ids = _IntVec()

        cdef list rtt_samples = [[] for _ in range(nf)]
        cdef list s_times = [], s_cwnd = [], s_qlen = []
        cdef object cca


        try:
            for l in range(nl):
                ser[l] = self.link_ser_py[l]
                buf[l] = self.link_buffer_py[l]
                in_service[l] = -1
                qlen[l] = 0
                arr_count[l] = 0
                dep_count[l] = 0
                l_drops[l] = 0
                fifo_bad[l] = 0
                max_q[l] = 0
                r = self.link_red[l]
                if r is None:
                    has_red[l] = False
                else:
                    has_red[l] = True
                    r_kmin[l] = r[0]
                    r_kmax[l] = r[1]
                    r_maxp[l] = r[2]
            for f in range(nf):
                fwd[f] = self.flow_fwd_py[f]
                ackd[f] = self.flow_ack_py[f]
                path_off[f] = path_links.n
                path_len[f] = len(self.flow_paths[f])
                for h in self.flow_paths[f]:
                    path_links.append(h)
                per_ack[f] = bool(self.ccas[f].per_ack)
                cwnd[f] = float(self.ccas[f].cwnd)
                phase[f] = 0.0
                for i in range(N_COUNTERS):
                    fcnt[i * nf + f] = 0
                fcnt[C_LASTSEQ * nf + f] = -1
                fcnt[C_ARTT * nf + f] = -1
                fcnt[C_AHOP * nf + f] = -1

            for f in range(nf):
                heap.push(self.flow_start[f], evseq, EV_START, f)
                evseq += 1
            if self.sample_interval > 0:
                heap.push(0, evseq, EV_SAMPLE, 0)
                evseq += 1

            while heap.n > 0:
                if heap.data[0].t > duration:
                    break
                ev = heap.pop()
                now = ev.t
                kind = ev.kind
                events += 1

                if kind == EV_ARRIVE or kind == EV_TXDONE:
                    if kind == EV_TXDONE:
                        l = ev.arg
                        p = in_service[l]
                        in_service[l] = -1
                        qlen[l] -= 1
                        p_hop.data[p] += 1
                        f = p_flow.data[p]
                        if p_hop.data[p] == path_len[f]:
                            fcnt[C_DELIV * nf + f] += 1
                            fcnt[C_INNET * nf + f] -= 1
                            if p_seq.data[p] <= fcnt[C_LASTSEQ * nf + f]:
                                fcnt[C_ORDER * nf + f] += 1
                            fcnt[C_LASTSEQ * nf + f] = p_seq.data[p]
                            if now >= warmup:
                                fcnt[C_WBYTES * nf + f] += pkt
                            heap.push(now + ackd[f], evseq, EV_ACK, p)
                            evseq += 1
                            p = -1
                    else:
                        p = ev.arg
                        l = -1
                    if p >= 0:
                        # ---- arrival of packet p at its next hop ----
                        f = p_flow.data[p]
                        h = path_links.data[path_off[f] + p_hop.data[p]]
                        if buf[h] >= 0 and qlen[h] >= buf[h]:
                            l_drops[h] += 1
                            fcnt[C_DROP * nf + f] += 1
                            fcnt[C_INNET * nf + f] -= 1
                            if tracing:
                                trace.append((now, f, "drop", p_seq.data[p], -1, cwnd[f]))
                            heap.push(now + ackd[f], evseq, EV_NACK, p)
                            evseq += 1
                        else:
                            if has_red[h]:
                                kmin = r_kmin[h]
                                kmax = r_kmax[h]
                                maxp = r_maxp[h]
                                q = qlen[h]
                                if q >= kmax:
                                    prob = maxp
                                elif q <= kmin:
                                    prob = 0.0
                                else:
                                    prob = maxp * (q - kmin) / (kmax - kmin)
                                if prob > 0.0 and self.link_rng[h].random() < prob:
                                    if not p_ecn.data[p] and tracing:
                                        trace.append((now, f, "mark", p_seq.data[p], -1, cwnd[f]))
                                    p_ecn.data[p] = 1
                            p_enq.data[p] = now
                            p_stamp.data[p] = arr_count[h]
                            arr_count[h] += 1
                            fq = queues[h]
                            fq.push(p)
                            qlen[h] += 1
                            if qlen[h] > max_q[h]:
                                max_q[h] = qlen[h]
                            if in_service[h] < 0:
                                self._start_tx(h, now, queues, in_service, dep_count, fifo_bad,
                                               ser, heap, &evseq, p_enq, p_qmax, p_stamp)
                    if l >= 0:
                        fq = queues[l]
                        if fq.n > 0:
                            self._start_tx(l, now, queues, in_service, dep_count, fifo_bad,
                                           ser, heap, &evseq, p_enq, p_qmax, p_stamp)

                elif kind == EV_ACK or kind == EV_NACK:
                    p = ev.arg
                    f = p_flow.data[p]
                    fcnt[C_INFL * nf + f] -= 1
                    lost = kind == EV_NACK
                    if lost:
                        fcnt[C_NACKED * nf + f] += 1
                        rtt = -1
                        ecn = 0
                        hop = 0
                    else:
                        fcnt[C_ACKED * nf + f] += 1
                        rtt = now - p_send.data[p]
                        ecn = <int> p_ecn.data[p]
                        hop = p_qmax.data[p]
                    if now >= warmup:
                        if lost:
                            fcnt[C_WLOSS * nf + f] += 1
                        else:
                            fcnt[C_WACKS * nf + f] += 1
                            fcnt[C_WMARKS * nf + f] += ecn
                            fcnt[C_WHOP * nf + f] += hop
                            (<list> rtt_samples[f]).append(rtt)
                    cca = self.ccas[f]
                    if per_ack[f]:
                        cwnd[f] = float(cca.on_ack(now, rtt, ecn, lost, hop))
                    else:
                        if lost:
                            fcnt[C_ALOSS * nf + f] += 1
                        else:
                            fcnt[C_AACKS * nf + f] += 1
                            fcnt[C_AMARKS * nf + f] += ecn
                            if fcnt[C_ARTT * nf + f] < 0 or rtt < fcnt[C_ARTT * nf + f]:
                                fcnt[C_ARTT * nf + f] = rtt
                            if fcnt[C_AHOP * nf + f] < 0 or hop < fcnt[C_AHOP * nf + f]:
                                fcnt[C_AHOP * nf + f] = hop
                        if fcnt[C_AACKS * nf + f] > 0 and now >= cca.next_update:
                            cwnd[f] = float(cca.on_interval(
                                now, fcnt[C_ARTT * nf + f], fcnt[C_AHOP * nf + f],
                                fcnt[C_AACKS * nf + f], fcnt[C_AMARKS * nf + f],
                                fcnt[C_ALOSS * nf + f]))
                            fcnt[C_ARTT * nf + f] = -1
                            fcnt[C_AHOP * nf + f] = -1
                            fcnt[C_AACKS * nf + f] = 0
                            fcnt[C_AMARKS * nf + f] = 0
                            fcnt[C_ALOSS * nf + f] = 0
                    if tracing and not lost:
                        trace.append((now, f, "ack", p_seq.data[p], rtt, cwnd[f], hop))
                    free_ids.append(p)
                    ph = phase[f] + DITHER_STEP
                    if ph >= 1.0:
                        ph -= 1.0
                    phase[f] = ph
                    self._send_burst(f, now, cwnd, phase, fcnt, nf, pkt, warmup, max_burst,
                                     fwd, heap, &evseq, free_ids, p_flow, p_seq, p_send, p_hop,
                                     p_ecn, p_qmax, p_enq, p_stamp, trace)

                elif kind == EV_SAMPLE:
                    s_times.append(now)
                    s_cwnd.append([cwnd[i] for i in range(nf)])
                    s_qlen.append([qlen[i] for i in range(nl)])
                    heap.push(now + self.sample_interval, evseq, EV_SAMPLE, 0)
                    evseq += 1
                else:
                    self._send_burst(ev.arg, now, cwnd, phase, fcnt, nf, pkt, warmup, max_burst,
                                     fwd, heap, &evseq, free_ids, p_flow, p_seq, p_send, p_hop,
                                     p_ecn, p_qmax, p_enq, p_stamp, trace)

            return {
                "end_time": now,
                "events": events,
                "flows": {
                    "sent": _col(fcnt, nf, C_SENT), "delivered": _col(fcnt, nf, C_DELIV), "dropped": _col(fcnt, nf, C_DROP),
                    "in_network": _col(fcnt, nf, C_INNET), "acked": _col(fcnt, nf, C_ACKED), "nacked": _col(fcnt, nf, C_NACKED),
                    "inflight": _col(fcnt, nf, C_INFL), "cwnd": [cwnd[j] for j in range(nf)],
                    "order_violations": _col(fcnt, nf, C_ORDER),
                    "w_sent": _col(fcnt, nf, C_WSENT), "w_bytes": _col(fcnt, nf, C_WBYTES), "w_acks": _col(fcnt, nf, C_WACKS),
                    "w_marks": _col(fcnt, nf, C_WMARKS), "w_losses": _col(fcnt, nf, C_WLOSS), "w_hop_sum": _col(fcnt, nf, C_WHOP),
                    "rtt_samples": rtt_samples,
                },
                "links": {
                    "arrivals": [arr_count[j] for j in range(nl)],
                    "departures": [dep_count[j] for j in range(nl)],
                    "drops": [l_drops[j] for j in range(nl)],
                    "fifo_violations": [fifo_bad[j] for j in range(nl)],
                    "max_queue": [max_q[j] for j in range(nl)],
                    "queue": [qlen[j] for j in range(nl)],
                },
                "samples": {"time": s_times, "cwnd": s_cwnd, "qlen": s_qlen},
                "trace": trace,
            }
        finally:
            free(ser); free(buf); free(in_service); free(qlen); free(arr_count)
            free(dep_count); free(l_drops); free(fifo_bad); free(max_q); free(has_red)
            free(r_kmin); free(r_kmax); free(r_maxp)
            free(fwd); free(ackd); free(path_len); free(path_off); free(per_ack)
            free(cwnd); free(phase); free(fcnt)

    cdef void _start_tx(self, Py_ssize_t l, int64_t now, list queues, int64_t* in_service,
                        int64_t* dep_count, int64_t* fifo_bad, int64_t* ser, _Heap heap,
                        int64_t* evseq, _IntVec p_enq, _IntVec p_qmax, _IntVec p_stamp) except *:
        cdef _Fifo fq = queues[l]
        cdef int64_t p = fq.pop()
        cdef int64_t wait
        in_service[l] = p
        wait = now - p_enq.data[p]
        if wait > p_qmax.data[p]:
            p_qmax.data[p] = wait
        if p_stamp.data[p] != dep_count[l]:
            fifo_bad[l] += 1
        dep_count[l] += 1
        heap.push(now + ser[l], evseq[0], EV_TXDONE, <int> l)
        evseq[0] += 1

    cdef void _send_burst(self, Py_ssize_t f, int64_t now, double* cwnd, double* phase,
                          int64_t* fcnt, Py_ssize_t nf, int64_t pkt, int64_t warmup, int max_burst,
                          int64_t* fwd, _Heap heap, int64_t* evseq, _IntVec free_ids,
                          _IntVec p_flow, _IntVec p_seq, _IntVec p_send, _IntVec p_hop,
                          _IntVec p_ecn, _IntVec p_qmax, _IntVec p_enq, _IntVec p_stamp,
                          list trace) except *:
        cdef int64_t limit = <int64_t> (cwnd[f] / pkt + phase[f])
        cdef int n = 0
        cdef int64_t p, sq
        if limit < 1:
            limit = 1
        while fcnt[C_INFL * nf + f] < limit and n < max_burst:
            sq = fcnt[C_NSEQ * nf + f]
            if free_ids.n > 0:
                free_ids.n -= 1
                p = free_ids.data[free_ids.n]
                p_flow.data[p] = f
                p_seq.data[p] = sq
                p_send.data[p] = now
                p_hop.data[p] = 0
                p_ecn.data[p] = 0
                p_qmax.data[p] = 0
            else:
                p = p_flow.n
                p_flow.append(f)
                p_seq.append(sq)
                p_send.append(now)
                p_hop.append(0)
                p_ecn.append(0)
                p_qmax.append(0)
                p_enq.append(0)
                p_stamp.append(0)
            if trace is not None:
                trace.append((now, f, "send", sq, -1, cwnd[f]))
            fcnt[C_NSEQ * nf + f] += 1
            fcnt[C_INFL * nf + f] += 1
            fcnt[C_SENT * nf + f] += 1
            fcnt[C_INNET * nf + f] += 1
            if now >= warmup:
                fcnt[C_WSENT * nf + f] += 1
            heap.push(now + fwd[f], evseq[0], EV_ARRIVE, <int> p)
            evseq[0] += 1
            n += 1
