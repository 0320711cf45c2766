//! Bit-level weight update `W <- W - J` as a single control token walking
//! through decode, compare, sign resolution, alignment, add/subtract,
//! normalization and writeback. Every scratch buffer is back at zero when
//! `done` is produced.

use super::inference::bit_place;
use super::{fmt_value, value_place, BlueprintError, Category, Port, PortRole, Segment, ValueDomain};
use crate::bitfloat::{
    resolve_sign_op, Comparison, Operation, UpdateValue, BIAS, GRID_FRAC, J_STICKY, MANT_BITS,
};
use crate::petri::{NetBuilder, PlaceId, TransitionId};

/// Grid positions of the aligned operands: 0 is the integer bit.
const A_LEN: u32 = GRID_FRAC + 1;
const B_LEN: u32 = MANT_BITS + J_STICKY + 1;
const EXP_LO: u32 = MANT_BITS;
/// Exponent bits written back; bit 30 stays 0 because results are < 2.
const EXP_BITS: u32 = 7;

#[derive(Clone, Debug)]
pub struct UpdatePorts {
    pub j_wire: String,
    pub j_domain: ValueDomain,
    pub done: String,
}

impl UpdatePorts {
    pub fn for_weight(k: usize, j_domain: ValueDomain) -> Self {
        UpdatePorts {
            j_wire: format!("J{k}"),
            j_domain,
            done: format!("done{k}"),
        }
    }
}

type Buf = (PlaceId, PlaceId);

struct Gen {
    b: NetBuilder,
    pre: String,
    k: usize,
}

impl Gen {
    fn p(&mut self, name: &str) -> PlaceId {
        let full = format!("{}.{name}", self.pre);
        self.b.ensure_place(&full)
    }

    fn t(&mut self, name: &str) -> TransitionId {
        self.b.transition(format!("{}.{name}", self.pre), name)
    }

    /// Two-place bit buffer, created at 0.
    fn buf(&mut self, name: &str) -> Buf {
        let z = self.p(&format!("{name}=0"));
        let o = self.p(&format!("{name}=1"));
        self.b.mark(z);
        (z, o)
    }

    fn reg(&mut self, n: u32) -> Buf {
        (
            self.b.ensure_place(&bit_place(self.k, n, false)),
            self.b.ensure_place(&bit_place(self.k, n, true)),
        )
    }

    fn step(&mut self, name: &str, from: PlaceId, to: PlaceId) -> TransitionId {
        let t = self.t(name);
        self.b.consume(from, t);
        self.b.produce(t, to);
        t
    }

    fn read(&mut self, t: TransitionId, buf: Buf, v: bool) {
        self.b.read(if v { buf.1 } else { buf.0 }, t);
    }

    /// Read `v` and leave the buffer at 0.
    fn take(&mut self, t: TransitionId, buf: Buf, v: bool) {
        if v {
            self.b.consume(buf.1, t);
            self.b.produce(t, buf.0);
        } else {
            self.b.read(buf.0, t);
        }
    }

    /// Raise a buffer known to hold 0 to `v`.
    fn raise(&mut self, t: TransitionId, buf: Buf, v: bool) {
        if v {
            self.b.consume(buf.0, t);
            self.b.produce(t, buf.1);
        }
    }

    /// Rewrite a buffer holding `cur` with `new`.
    fn overwrite(&mut self, t: TransitionId, buf: Buf, cur: bool, new: bool) {
        if cur == new {
            self.read(t, buf, cur);
        } else {
            self.b.consume(if cur { buf.1 } else { buf.0 }, t);
            self.b.produce(t, if new { buf.1 } else { buf.0 });
        }
    }

    /// Chain of single-position steps `name{i}` for `i` in `0..len`, ending
    /// in `end`; returns the control places, entry first.
    fn chain(&mut self, name: &str, len: u32, end: PlaceId) -> Vec<PlaceId> {
        let mut ctl: Vec<PlaceId> = (0..len).map(|i| self.p(&format!("{name}{i}"))).collect();
        ctl.push(end);
        ctl
    }

    /// Right shift by one position: `g[p] := g[p-1]` from the bottom up,
    /// then `g[0] := 0`. Control enters at the returned place.
    fn right_shift(&mut self, name: &str, g: &[Buf], end: PlaceId) -> PlaceId {
        let len = g.len() as u32;
        let ctl = self.chain(name, len, end);
        for (i, p) in (0..len).rev().enumerate() {
            let (here, next) = (ctl[i], ctl[i + 1]);
            if p == 0 {
                for cur in [false, true] {
                    let t = self.step(&format!("{name}{i}.{}", cur as u8), here, next);
                    self.overwrite(t, g[0], cur, false);
                }
                continue;
            }
            for cur in [false, true] {
                for src in [false, true] {
                    let t = self.step(&format!("{name}{i}.{}{}", cur as u8, src as u8), here, next);
                    self.read(t, g[p as usize - 1], src);
                    self.overwrite(t, g[p as usize], cur, src);
                }
            }
        }
        ctl[0]
    }

    /// Linear shift queue: `q{s}` steps to `q{s-1}` running one pass of
    /// the shift chain in between; `idle` interlocks the passes.
    fn queue(&mut self, name: &str, max: u32, idle: PlaceId, pass: PlaceId, end: PlaceId) -> Vec<PlaceId> {
        let q: Vec<PlaceId> = (0..=max).map(|s| self.p(&format!("{name}{s}"))).collect();
        for s in 1..=max {
            let t = self.t(&format!("{name}{s}.step"));
            self.b.consume(q[s as usize], t);
            self.b.consume(idle, t);
            self.b.produce(t, q[s as usize - 1]);
            self.b.produce(t, pass);
        }
        let t = self.t(&format!("{name}0.fin"));
        self.b.consume(q[0], t);
        self.b.consume(idle, t);
        self.b.produce(t, end);
        q
    }
}

/// Exponent field bits 23..29 of `e`; bit 30 is 0 for every magnitude
/// below 2.
fn exp_bits(e: u32) -> impl Iterator<Item = (u32, bool)> {
    (EXP_LO..EXP_LO + EXP_BITS).map(move |n| (n, e >> (n - EXP_LO) & 1 == 1))
}

/// Weight-update segment for register `k`.
pub fn gen_weight_update(k: usize, ports: &UpdatePorts) -> Result<Segment, BlueprintError> {
    let mut g = Gen {
        b: NetBuilder::new(),
        pre: format!("u{k}"),
        k,
    };
    let mut j_values = Vec::new();
    for v in ports.j_domain.values() {
        let t10 = v * super::int(10);
        if !t10.is_integer() {
            return Err(BlueprintError::Argument(format!("update value {} is not in tenths", fmt_value(v))));
        }
        let u = UpdateValue::from_tenths(t10.to_integer() as i32)
            .map_err(|e| BlueprintError::Argument(e.to_string()))?;
        j_values.push((*v, u));
    }
    let done = g.b.ensure_place(&ports.done);
    let reg: Vec<Buf> = (0..32).map(|n| g.reg(n)).collect();
    let jb: Vec<Buf> = (0..32).map(|n| g.buf(&format!("jb{n}"))).collect();
    let a: Vec<Buf> = (0..A_LEN).map(|p| g.buf(&format!("a{p}"))).collect();
    let bg: Vec<Buf> = (0..B_LEN).map(|p| g.buf(&format!("b{p}"))).collect();
    let r: Vec<Buf> = (0..A_LEN).map(|p| g.buf(&format!("r{p}"))).collect();
    let e: Vec<Buf> = (0..EXP_BITS).map(|i| g.buf(&format!("e{i}"))).collect();
    let ns = (g.p("ns=0"), g.p("ns=1"));

    // (a) J value to bit places; zero bypasses the pipeline.
    let cmp: Vec<PlaceId> = (0..31).map(|n| g.p(&format!("cmp{n}"))).collect();
    let spc = g.p("sp");
    for (v, u) in &j_values {
        let jw = g.b.ensure_place(&value_place(&ports.j_wire, v));
        if u.is_zero() {
            let t = g.t("bypass");
            g.b.consume(jw, t);
            g.b.produce(t, done);
            continue;
        }
        let t = g.t(&format!("jdec[{}]", fmt_value(v)));
        g.b.consume(jw, t);
        let bits = u.bits();
        for n in 0..32 {
            g.raise(t, jb[n as usize], bits.bit(n));
        }
        g.b.produce(t, spc);
    }

    // (b) Magnitude comparison from bit 30 down.
    let wg = g.p("W_G");
    let wl = g.p("W_L");
    let same = g.p("Same");
    for n in (0..31).rev() {
        let eq_next = if n == 0 { same } else { cmp[n - 1] };
        for (wv, jv, next) in [(false, false, eq_next), (true, true, eq_next), (true, false, wg), (false, true, wl)] {
            let t = g.step(&format!("cmp{n}.{}{}", wv as u8, jv as u8), cmp[n], next);
            g.read(t, reg[n], wv);
            g.read(t, jb[n], jv);
        }
    }

    // (c) Sign pair, then new sign and operation per comparison result.
    let op_add = g.p("op.add");
    let op_wj = g.p("op.sub_wj");
    let op_jw = g.p("op.sub_jw");
    let wexp = g.p("wexp");
    let sp = |g: &mut Gen, ws: bool, js: bool| g.p(&format!("sp{}{}", ws as u8, js as u8));
    for ws in [false, true] {
        for js in [false, true] {
            let to = sp(&mut g, ws, js);
            let t = g.step(&format!("sign[{}{}]", ws as u8, js as u8), spc, to);
            g.read(t, reg[31], ws);
            g.take(t, jb[31], js);
            g.b.produce(t, cmp[30]);
        }
    }
    for (c, place) in [(Comparison::WGreater, wg), (Comparison::WLess, wl), (Comparison::Same, same)] {
        for ws in [false, true] {
            for js in [false, true] {
                let (neg, op) = resolve_sign_op(c, ws, js);
                let t = g.step(&format!("resolve.{}[{}{}]", c.label(), ws as u8, js as u8), place, wexp);
                let from = sp(&mut g, ws, js);
                g.b.consume(from, t);
                g.b.produce(t, if neg { ns.1 } else { ns.0 });
                let opp = match op {
                    Operation::Add => op_add,
                    Operation::Sub { w_minus_j: true } => op_wj,
                    Operation::Sub { w_minus_j: false } => op_jw,
                    Operation::ZeroBypass => unreachable!("nonzero J"),
                };
                g.b.produce(t, opp);
            }
        }
    }

    // (d) Alignment of W: exponent decode, mantissa load, right shifts.
    let jexp = g.p("jexp");
    let widle = g.p("widle");
    let wsh = g.right_shift("wsh", &a, widle);
    let wq = g.queue("wq", BIAS - 1, widle, wsh, jexp);
    let wld = g.chain("wld", MANT_BITS, widle);
    for i in 0..MANT_BITS {
        let m = MANT_BITS - 1 - i;
        for v in [false, true] {
            let t = g.step(&format!("wld{i}.{}", v as u8), wld[i as usize], wld[i as usize + 1]);
            g.read(t, reg[m as usize], v);
            g.raise(t, a[i as usize + 1], v);
        }
    }
    for ex in 0..=BIAS {
        let t = g.t(&format!("wexp[{ex}]"));
        g.b.consume(wexp, t);
        for (n, v) in exp_bits(ex) {
            g.read(t, reg[n as usize], v);
        }
        if ex == 0 {
            // Zero and subnormal W align to nothing on the grid.
            g.b.produce(t, jexp);
        } else {
            g.raise(t, a[0], true);
            g.b.produce(t, wq[(BIAS - ex) as usize]);
            g.b.produce(t, wld[0]);
        }
    }

    // Alignment of J, consuming its bit places.
    let ar = g.p("ar");
    let jidle = g.p("jidle");
    let jsh = g.right_shift("jsh", &bg, jidle);
    let mut j_exps: Vec<u32> = j_values
        .iter()
        .filter(|(_, u)| !u.is_zero())
        .map(|(_, u)| u.bits().exponent())
        .collect();
    j_exps.sort();
    j_exps.dedup();
    let max_js = j_exps.iter().map(|&ex| BIAS - ex).max().unwrap_or(0);
    let jq = g.queue("jq", max_js, jidle, jsh, ar);
    let jld = g.chain("jld", MANT_BITS, jidle);
    for i in 0..MANT_BITS {
        let m = MANT_BITS - 1 - i;
        for v in [false, true] {
            let t = g.step(&format!("jld{i}.{}", v as u8), jld[i as usize], jld[i as usize + 1]);
            g.take(t, jb[m as usize], v);
            g.raise(t, bg[i as usize + 1], v);
        }
    }
    for &ex in &j_exps {
        let t = g.t(&format!("jexp[{ex}]"));
        g.b.consume(jexp, t);
        for (n, v) in exp_bits(ex) {
            g.take(t, jb[n as usize], v);
        }
        g.raise(t, bg[0], true);
        g.b.produce(t, jq[(BIAS - ex) as usize]);
        g.b.produce(t, jld[0]);
    }

    let nchk = g.p("nchk");
    // (e) Add or subtract into R, consuming A and B. Carry or borrow state
    // is part of the control place; below B's reach only J - W can borrow.
    let gchk = g.p("gchk");
    let guard = g.buf("guard");
    let ctl = |g: &mut Gen, name: &str, p: u32, c: bool| g.p(&format!("{name}{p}.c{}", c as u8));
    let reachable = |name: &str, p: u32, c: bool| !c || p + 1 < if name == "sjw" { A_LEN } else { B_LEN };
    for (name, opp) in [("add", op_add), ("swj", op_wj), ("sjw", op_jw)] {
        let entry = ctl(&mut g, name, A_LEN - 1, false);
        let t = g.step(&format!("ar.{name}"), ar, entry);
        g.b.consume(opp, t);
        for p in (0..A_LEN).rev() {
            for c in [false, true] {
                if !reachable(name, p, c) {
                    continue;
                }
                let here = ctl(&mut g, name, p, c);
                for av in [false, true] {
                    for bv in [false, true] {
                        if p >= B_LEN && bv {
                            continue;
                        }
                        let (ai, bi, ci) = (av as i32, bv as i32, c as i32);
                        let d = match name {
                            "add" => ai + bi + ci,
                            "swj" => ai - bi - ci,
                            _ => bi - ai - ci,
                        };
                        let bit = d.rem_euclid(2) == 1;
                        let out = if name == "add" { d >= 2 } else { d < 0 };
                        if p == 0 && out && name != "add" {
                            // The larger magnitude is always the minuend, so
                            // no borrow leaves the integer position.
                            continue;
                        }
                        let next = if p > 0 { ctl(&mut g, name, p - 1, out) } else { gchk };
                        let t = g.step(&format!("{name}{p}.{}{}{}", ai, bi, ci), here, next);
                        g.take(t, a[p as usize], av);
                        if p < B_LEN {
                            g.take(t, bg[p as usize], bv);
                        }
                        g.raise(t, r[p as usize], bit);
                        if p == 0 {
                            g.raise(t, guard, out);
                        }
                    }
                }
            }
        }
    }
    let sat = g.p("sat0");
    let t = g.step("guard.0", gchk, nchk);
    g.read(t, guard, false);
    let t = g.step("guard.1", gchk, sat);
    g.take(t, guard, true);

    // Saturation: the integer and mantissa positions all become 1.
    let satc = g.chain("sat", MANT_BITS + 1, nchk);
    for p in 0..=MANT_BITS {
        for v in [false, true] {
            let t = g.step(&format!("sat{p}.{}", v as u8), satc[p as usize], satc[p as usize + 1]);
            g.overwrite(t, r[p as usize], v, true);
        }
    }

    // (f) Normalization: left shifts counted on a unary queue.
    let nd: Vec<PlaceId> = (0..A_LEN).map(|s| g.p(&format!("nd{s}"))).collect();
    g.b.mark(nd[0]);
    let nfin = g.p("nfin");
    let ncnt = g.p("ncnt");
    let zs = g.p("zs");
    let t = g.step("norm.ok", nchk, nfin);
    g.read(t, r[0], true);
    let t = g.step("norm.all_0s", nchk, zs);
    g.b.consume(nd[0], t);
    for p in 0..A_LEN {
        g.read(t, r[p as usize], false);
    }
    let ls = g.chain("ls", A_LEN, ncnt);
    for p in 1..A_LEN {
        let t = g.step(&format!("norm.need{p}"), nchk, ls[0]);
        g.read(t, r[0], false);
        g.read(t, r[p as usize], true);
    }
    for p in 0..A_LEN {
        let (here, next) = (ls[p as usize], ls[p as usize + 1]);
        if p == A_LEN - 1 {
            for cur in [false, true] {
                let t = g.step(&format!("ls{p}.{}", cur as u8), here, next);
                g.overwrite(t, r[p as usize], cur, false);
            }
            continue;
        }
        for cur in [false, true] {
            for src in [false, true] {
                let t = g.step(&format!("ls{p}.{}{}", cur as u8, src as u8), here, next);
                g.read(t, r[p as usize + 1], src);
                g.overwrite(t, r[p as usize], cur, src);
            }
        }
    }
    for s in 0..A_LEN - 1 {
        let t = g.step(&format!("nd{s}.count"), ncnt, nchk);
        g.b.consume(nd[s as usize], t);
        g.b.produce(t, nd[s as usize + 1]);
    }

    // (g) Exponent 127 - shifts into E.
    let wbm0 = g.p("wbm0");
    let wb = g.chain("wbe", EXP_BITS, wbm0);
    for s in 0..A_LEN {
        let t = g.step(&format!("exp[{s}]"), nfin, wb[0]);
        g.b.consume(nd[s as usize], t);
        let ex = BIAS - s;
        for i in 0..EXP_BITS {
            g.raise(t, e[i as usize], ex >> i & 1 == 1);
        }
    }
    // An exact zero is +0.
    for v in [false, true] {
        let t = g.step(&format!("zero.sign{}", v as u8), zs, wb[0]);
        g.b.consume(if v { ns.1 } else { ns.0 }, t);
        g.b.produce(t, ns.0);
    }

    // (h) Writeback, clearing E, R and the sign as they are read.
    for i in 0..EXP_BITS {
        for ev in [false, true] {
            for rv in [false, true] {
                let t = g.step(&format!("wbe{i}.{}{}", ev as u8, rv as u8), wb[i as usize], wb[i as usize + 1]);
                g.take(t, e[i as usize], ev);
                g.overwrite(t, reg[(EXP_LO + i) as usize], rv, ev);
            }
        }
    }
    let wbs = g.p("wbs");
    let wbm = g.chain("wbm", MANT_BITS, wbs);
    for i in 0..MANT_BITS {
        let m = MANT_BITS - 1 - i;
        for av in [false, true] {
            for rv in [false, true] {
                let t = g.step(&format!("wbm{i}.{}{}", av as u8, rv as u8), wbm[i as usize], wbm[i as usize + 1]);
                g.take(t, r[i as usize + 1], av);
                g.overwrite(t, reg[m as usize], rv, av);
            }
        }
    }
    let clear: Vec<u32> = std::iter::once(0).chain(MANT_BITS + 1..A_LEN).collect();
    let fin = g.p("fin");
    let clr = g.chain("clr", clear.len() as u32, fin);
    for sv in [false, true] {
        for rv in [false, true] {
            let t = g.step(&format!("wbs.{}{}", sv as u8, rv as u8), wbs, clr[0]);
            g.b.consume(if sv { ns.1 } else { ns.0 }, t);
            g.overwrite(t, reg[31], rv, sv);
        }
    }
    for (i, &p) in clear.iter().enumerate() {
        for v in [false, true] {
            let t = g.step(&format!("clr{i}.{}", v as u8), clr[i], clr[i + 1]);
            g.take(t, r[p as usize], v);
        }
    }
    let t = g.step("done", fin, done);
    g.b.produce(t, nd[0]);

    let bits: Vec<String> = (0..32)
        .flat_map(|n| [bit_place(k, n, false), bit_place(k, n, true)])
        .collect();
    let segment_ports = vec![
        Port::value(PortRole::ValueIn, &ports.j_wire, &ports.j_domain),
        Port::state(PortRole::StateShared, &format!("w{k}.bits"), bits),
        Port::control(PortRole::ControlOut, &ports.done),
    ];
    Segment::new(&format!("u{k}"), Category::Training, g.b.build()?, segment_ports)
}
