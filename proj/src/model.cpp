#include "svlf/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "svlf/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace svlf {

SvlfModel init_model(SparseOctree octree, uint64_t seed) {
    Rng root(seed);
    SvlfModel m;
    const uint32_t verts = octree.vertex_count();
    m.octree = std::move(octree);
    m.feat_thickness = init_features(verts, kThicknessFeatDim,
                                     root.sub(kStreamFeaturesThickness).next_u64());
    m.feat_color = init_features(verts, kColorFeatDim, root.sub(kStreamFeaturesColor).next_u64());
    m.dec_thickness = MlpParams::init(MlpSpec::thickness_decoder(kThicknessFeatDim),
                                      root.sub(kStreamDecoderThickness).next_u64());
    m.dec_color =
        MlpParams::init(MlpSpec::color_decoder(kColorFeatDim), root.sub(kStreamDecoderColor).next_u64());
    return m;
}

ModelAdam ModelAdam::like(const SvlfModel& m) {
    ModelAdam a;
    a.feat_thickness = AdamState::like(m.feat_thickness.data.size());
    a.feat_color = AdamState::like(m.feat_color.data.size());
    for (size_t l = 0; l < m.dec_thickness.weights.size(); ++l) {
        a.dec_thickness.push_back(AdamState::like(m.dec_thickness.weights[l].size()));
        a.dec_thickness.push_back(AdamState::like(m.dec_thickness.biases[l].size()));
    }
    for (size_t l = 0; l < m.dec_color.weights.size(); ++l) {
        a.dec_color.push_back(AdamState::like(m.dec_color.weights[l].size()));
        a.dec_color.push_back(AdamState::like(m.dec_color.biases[l].size()));
    }
    return a;
}

namespace {

constexpr char kMagic[8] = {'S', 'V', 'L', 'F', '0', '0', '0', '1'};

struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    }
    void bytes(const void* p, size_t n) { out.write(static_cast<const char*>(p), n); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
    void f32v(const std::vector<float>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * 4);
    }
    void u64v(const std::vector<uint64_t>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * 8);
    }
};

struct Reader {
    std::ifstream in;
    explicit Reader(const std::string& path) : in(path, std::ios::binary) {
        if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    }
    void bytes(void* p, size_t n) {
        in.read(static_cast<char*>(p), n);
        if (!in) throw std::runtime_error("truncated checkpoint");
    }
    uint32_t u32() {
        uint32_t v;
        bytes(&v, 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        bytes(&v, 8);
        return v;
    }
    float f32() {
        float v;
        bytes(&v, 4);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
    std::vector<float> f32v() {
        std::vector<float> v(u64());
        bytes(v.data(), v.size() * 4);
        return v;
    }
    std::vector<uint64_t> u64v() {
        std::vector<uint64_t> v(u64());
        bytes(v.data(), v.size() * 8);
        return v;
    }
};

void write_spec(Writer& w, const MlpSpec& s) {
    w.u32(s.input_dim);
    w.u32(s.hidden_dim);
    w.u32(s.hidden_layers);
    w.u32(s.output_dim);
    for (Activation a : s.head) w.u32(static_cast<uint32_t>(a));
}

MlpSpec read_spec(Reader& r) {
    MlpSpec s;
    s.input_dim = r.u32();
    s.hidden_dim = r.u32();
    s.hidden_layers = r.u32();
    s.output_dim = r.u32();
    s.head.resize(s.output_dim);
    for (auto& a : s.head) a = static_cast<Activation>(r.u32());
    return s;
}

void write_mlp(Writer& w, const MlpParams& p) {
    write_spec(w, p.spec);
    for (size_t l = 0; l < p.weights.size(); ++l) {
        w.f32v(p.weights[l]);
        w.f32v(p.biases[l]);
    }
}

MlpParams read_mlp(Reader& r) {
    MlpParams p;
    p.spec = read_spec(r);
    for (uint32_t l = 0; l < p.spec.layer_count(); ++l) {
        p.weights.push_back(r.f32v());
        p.biases.push_back(r.f32v());
    }
    return p;
}

void write_adam(Writer& w, const AdamState& a) {
    w.u64(a.step);
    w.f32(a.beta1);
    w.f32(a.beta2);
    w.f32(a.eps);
    w.f32v(a.m);
    w.f32v(a.v);
}

AdamState read_adam(Reader& r) {
    AdamState a;
    a.step = r.u64();
    a.beta1 = r.f32();
    a.beta2 = r.f32();
    a.eps = r.f32();
    a.m = r.f32v();
    a.v = r.f32v();
    return a;
}

void write_features(Writer& w, const FeatureVolume& f) {
    w.u32(f.dim);
    w.f32v(f.data);
}

FeatureVolume read_features(Reader& r) {
    FeatureVolume f;
    f.dim = r.u32();
    f.data = r.f32v();
    f.grad.assign(f.data.size(), 0.0f);
    return f;
}

}  // namespace

void save_checkpoint(const std::string& path, const SvlfModel& model, const ModelAdam& adam) {
    Writer w(path);
    w.bytes(kMagic, 8);

    const GridConfig& g = model.octree.config();
    w.u32(g.resolution);
    w.u32(g.dilation);
    w.f64(g.scene_aabb.lo.x);
    w.f64(g.scene_aabb.lo.y);
    w.f64(g.scene_aabb.lo.z);
    w.f64(g.scene_aabb.hi.x);
    w.f64(g.scene_aabb.hi.y);
    w.f64(g.scene_aabb.hi.z);
    w.u64v(model.octree.leaf_codes());

    write_features(w, model.feat_thickness);
    write_features(w, model.feat_color);
    write_mlp(w, model.dec_thickness);
    write_mlp(w, model.dec_color);

    write_adam(w, adam.feat_thickness);
    write_adam(w, adam.feat_color);
    w.u32(static_cast<uint32_t>(adam.dec_thickness.size()));
    for (const auto& a : adam.dec_thickness) write_adam(w, a);
    w.u32(static_cast<uint32_t>(adam.dec_color.size()));
    for (const auto& a : adam.dec_color) write_adam(w, a);
    if (!w.out) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_checkpoint(const std::string& path, SvlfModel& model, ModelAdam& adam) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("bad checkpoint magic");

    GridConfig g;
    g.resolution = r.u32();
    g.dilation = r.u32();
    g.scene_aabb.lo = {r.f64(), r.f64(), r.f64()};
    g.scene_aabb.hi = {r.f64(), r.f64(), r.f64()};
    model.octree = SparseOctree::from_leaves(r.u64v(), g);

    model.feat_thickness = read_features(r);
    model.feat_color = read_features(r);
    model.dec_thickness = read_mlp(r);
    model.dec_color = read_mlp(r);

    adam.feat_thickness = read_adam(r);
    adam.feat_color = read_adam(r);
    adam.dec_thickness.resize(r.u32());
    for (auto& a : adam.dec_thickness) a = read_adam(r);
    adam.dec_color.resize(r.u32());
    for (auto& a : adam.dec_color) a = read_adam(r);
}

}  // namespace svlf
