// KernelTape: compiles the four kernel-entry expressions into one flat
// instruction list over shared slots, classified by dependence (constant /
// x-only / t-only / both). Constants fold at build, t-only slots are
// evaluated once over the grid, x-only slots once per row, and only slots
// with genuine (x,t) dependence cost a vector pass per row. Entries that
// factor as scalar*(vector slot) never materialize the product: the scalar
// multiplies the reduction result instead.

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nodal/kern.hpp"
#include "nodal/numerics.hpp"

namespace nodal::kern {

namespace {

using expr::DomainError;
using expr::Op;

enum class Cls : unsigned char { konst, xonly, tonly, xt };

Cls join(Cls a, Cls b) {
    if (a == Cls::xt || b == Cls::xt) return Cls::xt;
    if (a == Cls::konst) return b;
    if (b == Cls::konst) return a;
    return a == b ? a : Cls::xt;
}

bool is_scalar(Cls c) { return c == Cls::konst || c == Cls::xonly; }

struct Instr {
    Op op = Op::constant;
    int a = -1;
    int b = -1;
    double imm = 0.0;  // value when op == constant (folding result)
    Cls cls = Cls::konst;
    int buf = -1;       // buffer index for tonly/xt slots
    int sib = -1;       // sincos partner slot over the same operand
    bool sib_lead = false;  // true on the partner that runs the fused pass
    bool live = false;
};

struct InstrKey {
    Op op;
    int a;
    int b;
    std::uint64_t immbits;
    bool operator==(const InstrKey& o) const {
        return op == o.op && a == o.a && b == o.b && immbits == o.immbits;
    }
};

struct InstrKeyHash {
    std::size_t operator()(const InstrKey& k) const {
        std::uint64_t h = k.immbits * 0x9e3779b97f4a7c15ull;
        h ^= (static_cast<std::uint64_t>(k.a) << 32) ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.b));
        h ^= static_cast<std::uint64_t>(k.op) << 56;
        h ^= h >> 29;
        return static_cast<std::size_t>(h * 0xbf58476d1ce4e5b9ull);
    }
};

std::uint64_t bits_of(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    return u;
}

// Same arithmetic as Expr::eval, used for build-time folding of constant
// subtrees (domain violations in them surface at construction).
double fold_op(Op op, double va, double vb) {
    switch (op) {
        case Op::neg: return -va;
        case Op::add: return va + vb;
        case Op::sub: return va - vb;
        case Op::mul: return va * vb;
        case Op::div: return va / vb;
        case Op::pow:
            if (va < 0.0 && !expr::integer_exponent(vb))
                throw DomainError("negative base with non-integer exponent");
            return std::pow(va, vb);
        case Op::fn_sin: return std::sin(va);
        case Op::fn_cos: return std::cos(va);
        case Op::fn_exp: return std::exp(va);
        case Op::fn_sqrt:
            if (va < 0.0) throw DomainError("sqrt of negative value");
            return std::sqrt(va);
        case Op::fn_abs: return std::fabs(va);
        default: throw DomainError("corrupt expression node");
    }
}

bool is_unary(Op op) {
    switch (op) {
        case Op::neg:
        case Op::fn_sin:
        case Op::fn_cos:
        case Op::fn_exp:
        case Op::fn_sqrt:
        case Op::fn_abs: return true;
        default: return false;
    }
}

struct Output {
    bool zero = true;
    double kfactor = 1.0;        // folded constant factors
    std::vector<int> xscalars;   // x-only factor slots
    int vec = -1;                // vector slot (-1: entry constant over t)
};

}  // namespace

struct KernelTape::Impl {
    std::vector<double> tgrid;
    std::vector<Instr> instrs;
    std::unordered_map<InstrKey, int, InstrKeyHash> interned;
    Output outputs[4];

    std::vector<std::vector<double>> tbufs;   // filled at construction
    std::vector<std::vector<double>> sbufs;   // per-row scratch
    std::vector<double> svals;                // per-row x-only values
    std::vector<int> row_scalar_order;        // live xonly slots
    std::vector<int> row_vector_order;        // live xt slots

    int intern(Op op, int a, int b, double imm) {
        // Fold when every operand is constant.
        if (op != Op::constant) {
            bool foldable = (a < 0 || instrs[a].cls == Cls::konst) &&
                            (b < 0 || instrs[b].cls == Cls::konst) &&
                            op != Op::var_x && op != Op::var_t && op != Op::pi_const;
            if (foldable && (a >= 0 || b >= 0)) {
                double va = a >= 0 ? instrs[a].imm : 0.0;
                double vb = b >= 0 ? instrs[b].imm : 0.0;
                return intern(Op::constant, -1, -1, fold_op(op, va, vb));
            }
        }
        InstrKey key{op, a, b, op == Op::constant ? bits_of(imm) : 0};
        auto it = interned.find(key);
        if (it != interned.end()) return it->second;

        Instr ins;
        ins.op = op;
        ins.a = a;
        ins.b = b;
        switch (op) {
            case Op::constant: ins.imm = imm; ins.cls = Cls::konst; break;
            case Op::pi_const: ins.op = Op::constant; ins.imm = nodal::PI; ins.cls = Cls::konst; break;
            case Op::var_x: ins.cls = Cls::xonly; break;
            case Op::var_t: ins.cls = Cls::tonly; break;
            default:
                ins.cls = instrs[a].cls;
                if (b >= 0) ins.cls = join(ins.cls, instrs[b].cls);
                break;
        }
        int id = static_cast<int>(instrs.size());
        instrs.push_back(ins);
        interned.emplace(key, id);
        return id;
    }

    int intern_tree(const expr::Expr& e, int node_idx) {
        const expr::Node& nd = e.nodes()[node_idx];
        switch (nd.op) {
            case Op::constant: return intern(Op::constant, -1, -1, nd.value);
            case Op::pi_const: return intern(Op::pi_const, -1, -1, 0.0);
            case Op::var_x: return intern(Op::var_x, -1, -1, 0.0);
            case Op::var_t: return intern(Op::var_t, -1, -1, 0.0);
            default: {
                int a = intern_tree(e, nd.a);
                int b = is_unary(nd.op) ? -1 : intern_tree(e, nd.b);
                return intern(nd.op, a, b, 0.0);
            }
        }
    }

    void mark_live(int id) {
        Instr& ins = instrs[id];
        if (ins.live) return;
        ins.live = true;
        if (ins.a >= 0) mark_live(ins.a);
        if (ins.b >= 0) mark_live(ins.b);
    }

    void build_output(int e, const expr::Expr& ex) {
        Output& o = outputs[e];
        int root = intern_tree(ex, ex.root());
        const bool structurally_zero = ex.is_zero();
        if (structurally_zero || (instrs[root].cls == Cls::konst && instrs[root].imm == 0.0)) {
            o.zero = true;
            return;
        }
        o.zero = false;
        int cur = root;
        if (is_scalar(instrs[cur].cls)) {
            if (instrs[cur].cls == Cls::konst)
                o.kfactor = instrs[cur].imm;
            else
                o.xscalars.push_back(cur);
            o.vec = -1;
        } else {
            while (instrs[cur].op == Op::mul) {
                int a = instrs[cur].a, b = instrs[cur].b;
                bool as = is_scalar(instrs[a].cls), bs = is_scalar(instrs[b].cls);
                if (as && !bs) {
                    if (instrs[a].cls == Cls::konst)
                        o.kfactor *= instrs[a].imm;
                    else
                        o.xscalars.push_back(a);
                    cur = b;
                } else if (bs && !as) {
                    if (instrs[b].cls == Cls::konst)
                        o.kfactor *= instrs[b].imm;
                    else
                        o.xscalars.push_back(b);
                    cur = a;
                } else {
                    break;
                }
            }
            o.vec = cur;
        }
        for (int id : o.xscalars) mark_live(id);
        if (o.vec >= 0) mark_live(o.vec);
    }

    void pair_sincos() {
        // key: operand id -> slot of sin / cos over it (vector classes only).
        std::unordered_map<int, int> sin_of, cos_of;
        for (int id = 0; id < static_cast<int>(instrs.size()); ++id) {
            Instr& ins = instrs[id];
            if (!ins.live || is_scalar(ins.cls)) continue;
            if (ins.op == Op::fn_sin) sin_of[ins.a] = id;
            if (ins.op == Op::fn_cos) cos_of[ins.a] = id;
        }
        for (auto [operand, sid] : sin_of) {
            auto it = cos_of.find(operand);
            if (it == cos_of.end()) continue;
            int cid = it->second;
            if (instrs[sid].cls != instrs[cid].cls) continue;
            instrs[sid].sib = cid;
            instrs[cid].sib = sid;
            instrs[std::min(sid, cid)].sib_lead = true;
        }
    }

    void assign_buffers() {
        std::size_t gs = tgrid.size();
        for (int id = 0; id < static_cast<int>(instrs.size()); ++id) {
            Instr& ins = instrs[id];
            if (!ins.live) continue;
            switch (ins.cls) {
                case Cls::tonly:
                    ins.buf = static_cast<int>(tbufs.size());
                    tbufs.emplace_back(gs);
                    break;
                case Cls::xt:
                    ins.buf = static_cast<int>(sbufs.size());
                    sbufs.emplace_back(gs);
                    row_vector_order.push_back(id);
                    break;
                case Cls::xonly: row_scalar_order.push_back(id); break;
                case Cls::konst: break;
            }
        }
        svals.assign(instrs.size(), 0.0);
    }

    // ---- evaluation ----

    const double* vec_ptr(int id) const {
        const Instr& ins = instrs[id];
        return ins.cls == Cls::tonly ? tbufs[ins.buf].data() : sbufs[ins.buf].data();
    }
    double* out_ptr(int id) {
        Instr& ins = instrs[id];
        return ins.cls == Cls::tonly ? tbufs[ins.buf].data() : sbufs[ins.buf].data();
    }

    double scalar_value(int id, double x) const {
        const Instr& ins = instrs[id];
        if (ins.cls == Cls::konst) return ins.imm;
        if (ins.op == Op::var_x) return x;
        return svals[id];
    }

    double eval_scalar(int id, double x) {
        const Instr& ins = instrs[id];
        double va = ins.a >= 0 ? scalar_value(ins.a, x) : 0.0;
        double vb = ins.b >= 0 ? scalar_value(ins.b, x) : 0.0;
        if (ins.op == Op::var_x) return x;
        return fold_op(ins.op, va, vb);
    }

    void eval_vector(int id, double x, std::size_t count, const Kernels& K) {
        Instr& ins = instrs[id];
        if (ins.op == Op::var_t) {
            // var_t: tonly slot fed directly from the grid.
            std::memcpy(out_ptr(id), tgrid.data(), count * sizeof(double));
            return;
        }
        if (ins.sib >= 0 && !ins.sib_lead) return;  // filled by the partner
        double* out = out_ptr(id);

        if (is_unary(ins.op)) {
            const Instr& oa = instrs[ins.a];
            if (is_scalar(oa.cls))
                throw DomainError("corrupt tape: vector op over scalar operand");
            const double* A = vec_ptr(ins.a);
            switch (ins.op) {
                case Op::neg:
                    for (std::size_t i = 0; i < count; ++i) out[i] = -A[i];
                    return;
                case Op::fn_sin:
                case Op::fn_cos:
                    if (ins.sib >= 0) {
                        double* s = ins.op == Op::fn_sin ? out : out_ptr(ins.sib);
                        double* c = ins.op == Op::fn_cos ? out : out_ptr(ins.sib);
                        K.sincos_array(A, s, c, count);
                    } else if (ins.op == Op::fn_sin) {
                        K.sin_array(A, out, count);
                    } else {
                        K.cos_array(A, out, count);
                    }
                    return;
                case Op::fn_exp: K.exp_array(A, out, count); return;
                case Op::fn_sqrt:
                    for (std::size_t i = 0; i < count; ++i) {
                        if (A[i] < 0.0) throw DomainError("sqrt of negative value");
                        out[i] = std::sqrt(A[i]);
                    }
                    return;
                case Op::fn_abs:
                    for (std::size_t i = 0; i < count; ++i) out[i] = std::fabs(A[i]);
                    return;
                default: break;
            }
            throw DomainError("corrupt tape instruction");
        }

        const Instr& oa = instrs[ins.a];
        const Instr& ob = instrs[ins.b];
        const bool as = is_scalar(oa.cls);
        const bool bs = is_scalar(ob.cls);
        const double sa = as ? scalar_value(ins.a, x) : 0.0;
        const double sb = bs ? scalar_value(ins.b, x) : 0.0;
        const double* A = as ? nullptr : vec_ptr(ins.a);
        const double* B = bs ? nullptr : vec_ptr(ins.b);

        switch (ins.op) {
            case Op::add:
                if (as)
                    for (std::size_t i = 0; i < count; ++i) out[i] = sa + B[i];
                else if (bs)
                    for (std::size_t i = 0; i < count; ++i) out[i] = A[i] + sb;
                else
                    for (std::size_t i = 0; i < count; ++i) out[i] = A[i] + B[i];
                return;
            case Op::sub:
                if (as)
                    for (std::size_t i = 0; i < count; ++i) out[i] = sa - B[i];
                else if (bs)
                    for (std::size_t i = 0; i < count; ++i) out[i] = A[i] - sb;
                else
                    for (std::size_t i = 0; i < count; ++i) out[i] = A[i] - B[i];
                return;
            case Op::mul:
                if (as)
                    for (std::size_t i = 0; i < count; ++i) out[i] = sa * B[i];
                else if (bs)
                    for (std::size_t i = 0; i < count; ++i) out[i] = A[i] * sb;
                else
                    for (std::size_t i = 0; i < count; ++i) out[i] = A[i] * B[i];
                return;
            case Op::div:
                if (as)
                    for (std::size_t i = 0; i < count; ++i) out[i] = sa / B[i];
                else if (bs)
                    for (std::size_t i = 0; i < count; ++i) out[i] = A[i] / sb;
                else
                    for (std::size_t i = 0; i < count; ++i) out[i] = A[i] / B[i];
                return;
            case Op::pow:
                for (std::size_t i = 0; i < count; ++i) {
                    double base = as ? sa : A[i];
                    double ex = bs ? sb : B[i];
                    if (base < 0.0 && !expr::integer_exponent(ex))
                        throw DomainError("negative base with non-integer exponent");
                    out[i] = std::pow(base, ex);
                }
                return;
            default: break;
        }
        throw DomainError("corrupt tape instruction");
    }

    void eval_row(double x, std::size_t count) {
        if (count > tgrid.size())
            throw std::invalid_argument("kernel tape: row length exceeds the t-grid");
        for (int id : row_scalar_order) svals[id] = eval_scalar(id, x);
        const Kernels& K = kernels();
        for (int id : row_vector_order) eval_vector(id, x, count, K);
    }

    void precompute_tonly() {
        const Kernels& K = kernels();
        for (int id = 0; id < static_cast<int>(instrs.size()); ++id) {
            Instr& ins = instrs[id];
            if (!ins.live || ins.cls != Cls::tonly) continue;
            eval_vector(id, 0.0, tgrid.size(), K);
        }
    }
};

KernelTape::KernelTape(const expr::Expr& m11, const expr::Expr& m12,
                       const expr::Expr& m21, const expr::Expr& m22,
                       std::vector<double> t_grid)
    : impl_(new Impl) {
    impl_->tgrid = std::move(t_grid);
    const expr::Expr* entries[4] = {&m11, &m12, &m21, &m22};
    for (int e = 0; e < 4; ++e) {
        if (entries[e]->arity() != expr::Arity::bivariate)
            throw std::invalid_argument("kernel tape entries must be bivariate expressions");
        impl_->build_output(e, *entries[e]);
    }
    impl_->pair_sincos();
    impl_->assign_buffers();
    impl_->precompute_tonly();
}

KernelTape::~KernelTape() = default;
KernelTape::KernelTape(KernelTape&&) noexcept = default;
KernelTape& KernelTape::operator=(KernelTape&&) noexcept = default;

KernelTape::Memory KernelTape::accumulate(double x, std::size_t count, const double* w,
                                          const double* phi1, const double* phi2) {
    Impl& im = *impl_;
    im.eval_row(x, count);
    const Kernels& K = kernels();
    const double* phis[4] = {phi1, phi2, phi1, phi2};
    Memory m;
    double* target[4] = {&m.i1, &m.i1, &m.i2, &m.i2};
    for (int e = 0; e < 4; ++e) {
        const Output& o = im.outputs[e];
        if (o.zero) continue;
        double s = o.kfactor;
        for (int id : o.xscalars) s *= im.svals[id];
        double red = o.vec < 0 ? K.dot(w, phis[e], count)
                               : K.dot3(w, im.vec_ptr(o.vec), phis[e], count);
        *target[e] += s * red;
    }
    return m;
}

void KernelTape::entry_row(int entry, double x, std::size_t count, double* out) {
    if (entry < 0 || entry > 3) throw std::invalid_argument("kernel tape entry index");
    Impl& im = *impl_;
    const Output& o = im.outputs[entry];
    if (o.zero) {
        for (std::size_t i = 0; i < count; ++i) out[i] = 0.0;
        return;
    }
    im.eval_row(x, count);
    double s = o.kfactor;
    for (int id : o.xscalars) s *= im.svals[id];
    if (o.vec < 0) {
        for (std::size_t i = 0; i < count; ++i) out[i] = s;
    } else {
        const double* v = im.vec_ptr(o.vec);
        for (std::size_t i = 0; i < count; ++i) out[i] = s * v[i];
    }
}

bool KernelTape::entry_is_zero(int entry) const {
    if (entry < 0 || entry > 3) throw std::invalid_argument("kernel tape entry index");
    return impl_->outputs[entry].zero;
}

bool KernelTape::all_zero() const {
    return impl_->outputs[0].zero && impl_->outputs[1].zero && impl_->outputs[2].zero &&
           impl_->outputs[3].zero;
}

std::size_t KernelTape::grid_size() const { return impl_->tgrid.size(); }

}  // namespace nodal::kern
