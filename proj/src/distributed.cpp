#include "rt/distributed.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rt/evaluation.hpp"

namespace rt {

namespace {

constexpr uint32_t kFrameMagic = 0x52474431;

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

void put_u16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v & 0xff));
    b.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

std::string hex32(uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

}  // namespace

uint32_t crc32(const void* data, size_t n) {
    static const auto table = make_crc_table();
    const uint8_t* p = static_cast<const uint8_t*>(data);
    uint32_t c = 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) c = table[(c ^ p[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> serialize_frame(const GradientFrame& f) {
    std::vector<uint8_t> body;
    body.reserve(14 + f.payload.size() * sizeof(Scalar) + 4);
    put_u32(body, f.epoch);
    put_u32(body, f.step);
    put_u16(body, f.worker);
    put_u32(body, f.shard_size);
    size_t payload_at = body.size();
    body.resize(payload_at + f.payload.size() * sizeof(Scalar));
    std::memcpy(body.data() + payload_at, f.payload.data(), f.payload.size() * sizeof(Scalar));
    uint32_t crc = crc32(body.data(), body.size());
    put_u32(body, crc);

    std::vector<uint8_t> out;
    out.reserve(8 + body.size());
    put_u32(out, kFrameMagic);
    put_u32(out, static_cast<uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

GradientFrame parse_frame(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8) throw std::runtime_error("gradient frame truncated (header)");
    uint32_t magic = get_u32(bytes.data());
    if (magic != kFrameMagic)
        throw std::runtime_error("not a gradient frame (bad magic " + hex32(magic) + ")");
    uint32_t len = get_u32(bytes.data() + 4);
    if (bytes.size() != static_cast<size_t>(len) + 8)
        throw std::runtime_error("gradient frame length " + std::to_string(len) +
                                 " does not match " + std::to_string(bytes.size() - 8) +
                                 " bytes on the wire");
    if (len < 14 + 4) throw std::runtime_error("gradient frame truncated (fields)");
    const uint8_t* p = bytes.data() + 8;
    GradientFrame f;
    f.epoch = get_u32(p);
    f.step = get_u32(p + 4);
    f.worker = get_u16(p + 8);
    f.shard_size = get_u32(p + 10);
    size_t payload_bytes = len - 14 - 4;
    if (payload_bytes % sizeof(Scalar) != 0)
        throw std::runtime_error("gradient frame payload is not a whole number of scalars");
    uint32_t stored = get_u32(p + len - 4);
    uint32_t computed = crc32(p, len - 4);
    if (stored != computed)
        throw std::runtime_error("gradient frame checksum mismatch (stored " + hex32(stored) +
                                 ", computed " + hex32(computed) + ")");
    f.payload.resize(payload_bytes / sizeof(Scalar));
    std::memcpy(f.payload.data(), p + 14, payload_bytes);
    return f;
}

std::vector<std::pair<int, int>> shard_spans(int n, int workers) {
    if (workers < 1) throw std::invalid_argument("shard_spans: workers must be >= 1");
    if (n < 0) throw std::invalid_argument("shard_spans: negative n");
    std::vector<std::pair<int, int>> spans;
    spans.reserve(static_cast<size_t>(workers));
    int base = n / workers, extra = n % workers, at = 0;
    for (int w = 0; w < workers; ++w) {
        int c = base + (w < extra ? 1 : 0);
        spans.emplace_back(at, c);
        at += c;
    }
    return spans;
}

namespace {

std::vector<Scalar> flatten_sorted(const std::map<std::string, Tensor>& grads) {
    std::vector<Scalar> out;
    for (const auto& [name, g] : grads) out.insert(out.end(), g.data.begin(), g.data.end());
    return out;
}

std::map<std::string, Tensor> unflatten_sorted(const Model& ref, const std::vector<Scalar>& flat) {
    if (static_cast<int64_t>(flat.size()) != ref.parameter_count())
        throw std::runtime_error("gradient payload holds " + std::to_string(flat.size()) +
                                 " scalars, model has " + std::to_string(ref.parameter_count()) +
                                 " parameters");
    std::map<std::string, Tensor> out;
    size_t at = 0;
    for (const auto& name : ref.sorted_param_names()) {
        const Tensor& shape_ref = ref.param(name);
        Tensor t = Tensor::zeros(shape_ref.shape);
        std::copy_n(flat.begin() + static_cast<long>(at), t.numel(), t.data.begin());
        at += static_cast<size_t>(t.numel());
        out.emplace(name, std::move(t));
    }
    return out;
}

}  // namespace

GradientFrame worker_step(const Model& m, const TrainConfig& cfg, const Dataset& train,
                          uint32_t epoch, uint32_t step, uint16_t worker,
                          const std::vector<int>& idx) {
    GradientFrame f;
    f.epoch = epoch;
    f.step = step;
    f.worker = worker;
    f.shard_size = static_cast<uint32_t>(idx.size());
    if (idx.empty()) {
        f.payload.assign(static_cast<size_t>(m.parameter_count()), Scalar(0));
        return f;
    }
    Tensor X = gather_rows(train.inputs, idx);
    std::vector<int> y = gather_labels(train.labels, idx);
    if (cfg.attack) {
        uint64_t epoch_seed = mix(cfg.master_seed, epoch);
        std::vector<uint64_t> seeds(idx.size());
        for (size_t i = 0; i < idx.size(); ++i)
            seeds[i] = mix(epoch_seed, static_cast<uint64_t>(idx[i]));
        X = perturb_batch(m, X, y, *cfg.attack, seeds);
    }
    BatchGrads bg = batch_gradients(m, X, y);
    f.payload = flatten_sorted(bg.grads);
    return f;
}

std::map<std::string, Tensor> all_reduce_mean(const std::vector<GradientFrame>& frames,
                                              const Model& ref, int batch_total) {
    if (frames.empty()) throw std::invalid_argument("all_reduce_mean: no frames");
    if (batch_total < 1) throw std::invalid_argument("all_reduce_mean: batch_total must be >= 1");
    size_t W = frames.size();
    int64_t count = ref.parameter_count();
    std::vector<bool> seen(W, false);
    int64_t shard_sum = 0;
    for (const auto& f : frames) {
        if (f.epoch != frames[0].epoch || f.step != frames[0].step)
            throw std::runtime_error("all_reduce_mean: frame from worker " +
                                     std::to_string(f.worker) + " reports epoch " +
                                     std::to_string(f.epoch) + " step " + std::to_string(f.step) +
                                     ", expected epoch " + std::to_string(frames[0].epoch) +
                                     " step " + std::to_string(frames[0].step));
        if (f.worker >= W)
            throw std::runtime_error("all_reduce_mean: worker id " + std::to_string(f.worker) +
                                     " out of range for " + std::to_string(W) + " frames");
        if (seen[f.worker])
            throw std::runtime_error("all_reduce_mean: duplicate frame from worker " +
                                     std::to_string(f.worker));
        seen[f.worker] = true;
        if (static_cast<int64_t>(f.payload.size()) != count)
            throw std::runtime_error("all_reduce_mean: worker " + std::to_string(f.worker) +
                                     " payload holds " + std::to_string(f.payload.size()) +
                                     " scalars, model has " + std::to_string(count));
        shard_sum += f.shard_size;
    }
    if (shard_sum != batch_total)
        throw std::runtime_error("all_reduce_mean: shard sizes sum to " +
                                 std::to_string(shard_sum) + ", batch is " +
                                 std::to_string(batch_total));

    // fixed accumulation order: worker 0 first, then 1, 2, ...
    std::vector<Scalar> acc(static_cast<size_t>(count));
    for (size_t w = 0; w < W; ++w) {
        const GradientFrame* f = nullptr;
        for (const auto& c : frames)
            if (c.worker == static_cast<uint16_t>(w)) f = &c;
        if (!f)
            throw std::runtime_error("all_reduce_mean: no frame from worker " + std::to_string(w));
        Scalar weight =
            static_cast<Scalar>(static_cast<double>(f->shard_size) / batch_total);
        if (w == 0) {
            for (int64_t i = 0; i < count; ++i)
                acc[static_cast<size_t>(i)] = weight * f->payload[static_cast<size_t>(i)];
        } else {
            for (int64_t i = 0; i < count; ++i)
                acc[static_cast<size_t>(i)] += weight * f->payload[static_cast<size_t>(i)];
        }
    }
    return unflatten_sorted(ref, acc);
}

Transport parse_transport(const std::string& s) {
    if (s == "inprocess") return Transport::inprocess;
    if (s == "socket") return Transport::socket;
    throw std::invalid_argument("unknown transport '" + s + "' (expected inprocess or socket)");
}

// ---------------------------------------------------------------------------
// replica state shared by both transports

namespace {

class WorkerState {
  public:
    WorkerState(Model model, TrainConfig cfg, const Dataset* train, uint16_t id)
        : model_(std::move(model)), st_(make_optimizer_state(model_)), cfg_(std::move(cfg)),
          train_(train), id_(id) {}

    GradientFrame assign(uint32_t epoch, uint32_t step, const std::vector<int>& idx) {
        return worker_step(model_, cfg_, *train_, epoch, step, id_, idx);
    }

    void reduced(uint32_t epoch, const std::vector<Scalar>& payload) {
        auto grads = unflatten_sorted(model_, payload);
        sgd_step(model_, st_, grads, lr_at_epoch(cfg_, static_cast<int>(epoch)), cfg_.momentum,
                 cfg_.weight_decay);
    }

  private:
    Model model_;
    OptimizerState st_;
    TrainConfig cfg_;
    const Dataset* train_;
    uint16_t id_;
};

class WorkerChannel {
  public:
    virtual ~WorkerChannel() = default;
    virtual void send_assign(uint32_t epoch, uint32_t step, const std::vector<int>& idx) = 0;
    virtual GradientFrame recv_frame() = 0;
    virtual void send_reduced(uint32_t epoch, const std::vector<Scalar>& payload) = 0;
    virtual void finish() = 0;
};

class InprocessChannel final : public WorkerChannel {
  public:
    InprocessChannel(Model model, const TrainConfig& cfg, const Dataset* train, uint16_t id)
        : state_(std::move(model), cfg, train, id) {}

    void send_assign(uint32_t epoch, uint32_t step, const std::vector<int>& idx) override {
        pending_ = state_.assign(epoch, step, idx);
    }
    GradientFrame recv_frame() override { return std::move(pending_); }
    void send_reduced(uint32_t epoch, const std::vector<Scalar>& payload) override {
        state_.reduced(epoch, payload);
    }
    void finish() override {}

  private:
    WorkerState state_;
    GradientFrame pending_;
};

// ---------------------------------------------------------------------------
// loopback TCP plumbing

void write_full(int fd, const void* p, size_t n, const std::string& who) {
    const char* c = static_cast<const char*>(p);
    while (n > 0) {
        ssize_t w = ::write(fd, c, n);
        if (w <= 0) {
            if (w < 0 && errno == EINTR) continue;
            throw std::runtime_error(who + ": connection closed while writing");
        }
        c += w;
        n -= static_cast<size_t>(w);
    }
}

void read_full(int fd, void* p, size_t n, const std::string& who) {
    char* c = static_cast<char*>(p);
    while (n > 0) {
        ssize_t r = ::read(fd, c, n);
        if (r <= 0) {
            if (r < 0 && errno == EINTR) continue;
            throw std::runtime_error(who + ": connection closed while reading");
        }
        c += r;
        n -= static_cast<size_t>(r);
    }
}

void send_msg(int fd, char type, const std::vector<uint8_t>& body, const std::string& who) {
    std::vector<uint8_t> head;
    put_u32(head, static_cast<uint32_t>(body.size() + 1));
    head.push_back(static_cast<uint8_t>(type));
    write_full(fd, head.data(), head.size(), who);
    if (!body.empty()) write_full(fd, body.data(), body.size(), who);
}

std::pair<char, std::vector<uint8_t>> recv_msg(int fd, const std::string& who) {
    uint8_t head[4];
    read_full(fd, head, 4, who);
    uint32_t len = get_u32(head);
    if (len < 1 || len > (1u << 28))
        throw std::runtime_error(who + ": bad message length " + std::to_string(len));
    std::vector<uint8_t> body(len);
    read_full(fd, body.data(), len, who);
    char type = static_cast<char>(body[0]);
    body.erase(body.begin());
    return {type, std::move(body)};
}

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(Fd&& o) noexcept : fd(o.fd) { o.fd = -1; }
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd = o.fd;
            o.fd = -1;
        }
        return *this;
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Fd tcp_listen(int port, int backlog, int* actual_port) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (fd.fd < 0) throw std::runtime_error("coordinator: cannot create socket");
    int one = 1;
    ::setsockopt(fd.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::bind(fd.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw std::runtime_error("coordinator: cannot bind port " + std::to_string(port) + ": " +
                                 std::strerror(errno));
    if (::listen(fd.fd, backlog) != 0)
        throw std::runtime_error("coordinator: listen failed: " + std::string(std::strerror(errno)));
    socklen_t alen = sizeof(addr);
    if (::getsockname(fd.fd, reinterpret_cast<sockaddr*>(&addr), &alen) != 0)
        throw std::runtime_error("coordinator: getsockname failed");
    if (actual_port) *actual_port = ntohs(addr.sin_port);
    return fd;
}

Fd tcp_connect(const std::string& host, int port) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (fd.fd < 0) throw std::runtime_error("worker: cannot create socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw std::runtime_error("worker: bad host address '" + host + "'");
    if (::connect(fd.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw std::runtime_error("worker: cannot connect to " + host + ":" +
                                 std::to_string(port) + ": " + std::strerror(errno));
    set_nodelay(fd.fd);
    return fd;
}

class SocketChannel final : public WorkerChannel {
  public:
    SocketChannel(Fd fd, uint16_t id) : fd_(std::move(fd)), id_(id) {}

    void send_assign(uint32_t epoch, uint32_t step, const std::vector<int>& idx) override {
        epoch_ = epoch;
        step_ = step;
        std::vector<uint8_t> body;
        put_u32(body, epoch);
        put_u32(body, step);
        put_u32(body, static_cast<uint32_t>(idx.size()));
        for (int i : idx) put_u32(body, static_cast<uint32_t>(i));
        send_msg(fd_.fd, 'A', body, who());
    }

    GradientFrame recv_frame() override {
        auto [type, body] = recv_msg(fd_.fd, who());
        if (type != 'F')
            throw std::runtime_error(who() + ": expected a gradient frame, got message '" +
                                     std::string(1, type) + "'");
        return parse_frame(body);
    }

    void send_reduced(uint32_t epoch, const std::vector<Scalar>& payload) override {
        std::vector<uint8_t> body;
        put_u32(body, epoch);
        size_t at = body.size();
        body.resize(at + payload.size() * sizeof(Scalar));
        std::memcpy(body.data() + at, payload.data(), payload.size() * sizeof(Scalar));
        send_msg(fd_.fd, 'R', body, who());
    }

    void finish() override { send_msg(fd_.fd, 'D', {}, who()); }

  private:
    std::string who() const {
        return "worker " + std::to_string(id_) + " at epoch " + std::to_string(epoch_) + " step " +
               std::to_string(step_);
    }

    Fd fd_;
    uint16_t id_;
    uint32_t epoch_ = 0, step_ = 0;
};

// ---------------------------------------------------------------------------
// coordinator

TrainResult coordinator_loop(Model model, const Dataset& train, const Dataset& val,
                             const TrainConfig& cfg,
                             std::vector<std::unique_ptr<WorkerChannel>>& chans) {
    int W = static_cast<int>(chans.size());
    int n = train.size();
    OptimizerState st = make_optimizer_state(model);
    TrainResult res;
    double best_score = -1;

    for (int e = 0; e < cfg.epochs; ++e) {
        auto t0 = std::chrono::steady_clock::now();
        uint64_t epoch_seed = mix(cfg.master_seed, static_cast<uint64_t>(e));
        std::vector<int> perm = shuffled_indices(n, epoch_seed);
        double lr = lr_at_epoch(cfg, e);
        uint32_t step = 0;
        for (int start = 0; start < n; start += cfg.batch, ++step) {
            int c = std::min(cfg.batch, n - start);
            auto spans = shard_spans(c, W);
            for (int w = 0; w < W; ++w) {
                auto [off, cnt] = spans[static_cast<size_t>(w)];
                std::vector<int> idx(perm.begin() + start + off,
                                     perm.begin() + start + off + cnt);
                chans[static_cast<size_t>(w)]->send_assign(static_cast<uint32_t>(e), step, idx);
            }
            std::vector<GradientFrame> frames;
            frames.reserve(static_cast<size_t>(W));
            for (int w = 0; w < W; ++w)
                frames.push_back(chans[static_cast<size_t>(w)]->recv_frame());
            auto reduced = all_reduce_mean(frames, model, c);
            std::vector<Scalar> payload = flatten_sorted(reduced);
            for (int w = 0; w < W; ++w)
                chans[static_cast<size_t>(w)]->send_reduced(static_cast<uint32_t>(e), payload);
            sgd_step(model, st, reduced, lr, cfg.momentum, cfg.weight_decay);
        }

        EpochMetrics tm;
        tm.epoch = e;
        tm.split = "train";
        tm.loss = -1;  // frames carry gradients only
        tm.eps = cfg.attack ? cfg.attack->eps : 0;
        tm.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.history.push_back(tm);

        if (val.size() > 0 && (e + 1) % cfg.validation_cadence == 0) {
            const PerturbationSpec* spec = cfg.attack ? &*cfg.attack : nullptr;
            EvalResult ev = evaluate(model, val, spec);
            EpochMetrics vm;
            vm.epoch = e;
            vm.split = "val";
            vm.loss = ev.mean_clean_loss;
            vm.clean_acc = ev.clean_acc;
            vm.adv_acc = ev.adv_acc;
            vm.eps = tm.eps;
            res.history.push_back(vm);
            double score = cfg.attack ? ev.adv_acc : ev.clean_acc;
            if (score > best_score) {
                best_score = score;
                res.best_model = model;
                res.best_epoch = e;
            }
        }
    }
    for (auto& ch : chans) ch->finish();
    res.final_model = std::move(model);
    if (res.best_epoch < 0) res.best_model = res.final_model;
    return res;
}

void socket_worker_serve(int fd, Model model, const TrainConfig& cfg, const Dataset& train) {
    std::string who = "worker (unwelcomed)";
    auto [type, body] = recv_msg(fd, who);
    if (type != 'W' || body.size() < 4)
        throw std::runtime_error("worker: expected a welcome message");
    uint16_t id = get_u16(body.data());
    who = "worker " + std::to_string(id);
    WorkerState state(std::move(model), cfg, &train, id);
    for (;;) {
        auto [t, b] = recv_msg(fd, who);
        if (t == 'A') {
            if (b.size() < 12) throw std::runtime_error(who + ": malformed assignment");
            uint32_t epoch = get_u32(b.data());
            uint32_t step = get_u32(b.data() + 4);
            uint32_t count = get_u32(b.data() + 8);
            if (b.size() != 12 + static_cast<size_t>(count) * 4)
                throw std::runtime_error(who + ": assignment length mismatch");
            std::vector<int> idx(count);
            for (uint32_t i = 0; i < count; ++i)
                idx[i] = static_cast<int>(get_u32(b.data() + 12 + 4 * i));
            GradientFrame f = state.assign(epoch, step, idx);
            send_msg(fd, 'F', serialize_frame(f), who);
        } else if (t == 'R') {
            if (b.size() < 4 || (b.size() - 4) % sizeof(Scalar) != 0)
                throw std::runtime_error(who + ": malformed reduced-gradient message");
            uint32_t epoch = get_u32(b.data());
            std::vector<Scalar> payload((b.size() - 4) / sizeof(Scalar));
            std::memcpy(payload.data(), b.data() + 4, b.size() - 4);
            state.reduced(epoch, payload);
        } else if (t == 'D') {
            return;
        } else {
            throw std::runtime_error(who + ": unexpected message '" + std::string(1, t) + "'");
        }
    }
}

}  // namespace

void run_socket_worker(const std::string& host, int port, Model model, const TrainConfig& cfg,
                       const Dataset& train) {
    Fd fd = tcp_connect(host, port);
    socket_worker_serve(fd.fd, std::move(model), cfg, train);
}

TrainResult distributed_train_listen(Model model, const Dataset& train, const Dataset& val,
                                     const TrainConfig& cfg, int workers, int port) {
    cfg.validate();
    if (workers < 1) throw std::invalid_argument("distributed: workers must be >= 1");
    Fd lfd = tcp_listen(port, workers, nullptr);
    std::vector<std::unique_ptr<WorkerChannel>> chans;
    for (int w = 0; w < workers; ++w) {
        int cfd = ::accept(lfd.fd, nullptr, nullptr);
        if (cfd < 0) throw std::runtime_error("coordinator: accept failed");
        set_nodelay(cfd);
        std::vector<uint8_t> body;
        put_u16(body, static_cast<uint16_t>(w));
        put_u16(body, static_cast<uint16_t>(workers));
        send_msg(cfd, 'W', body, "worker " + std::to_string(w));
        chans.push_back(std::make_unique<SocketChannel>(Fd(cfd), static_cast<uint16_t>(w)));
    }
    return coordinator_loop(std::move(model), train, val, cfg, chans);
}

TrainResult distributed_train(Model model, const Dataset& train, const Dataset& val,
                              const TrainConfig& cfg, int workers, Transport transport) {
    cfg.validate();
    if (workers < 1) throw std::invalid_argument("distributed: workers must be >= 1");

    if (transport == Transport::inprocess) {
        std::vector<std::unique_ptr<WorkerChannel>> chans;
        for (int w = 0; w < workers; ++w)
            chans.push_back(std::make_unique<InprocessChannel>(model, cfg, &train,
                                                               static_cast<uint16_t>(w)));
        return coordinator_loop(std::move(model), train, val, cfg, chans);
    }

    int port = 0;
    Fd lfd = tcp_listen(0, workers, &port);
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    std::vector<std::string> worker_errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        // each thread owns its model copy, taken before the coordinator's
        // copy is moved away
        threads.emplace_back([&worker_errors, &train, &cfg, port, w, model] {
            try {
                run_socket_worker("127.0.0.1", port, model, cfg, train);
            } catch (const std::exception& ex) {
                worker_errors[static_cast<size_t>(w)] = ex.what();
            }
        });
    }
    struct Joiner {
        std::vector<std::thread>& ts;
        ~Joiner() {
            for (auto& t : ts)
                if (t.joinable()) t.join();
        }
    } joiner{threads};

    std::vector<std::unique_ptr<WorkerChannel>> chans;
    for (int w = 0; w < workers; ++w) {
        int cfd = ::accept(lfd.fd, nullptr, nullptr);
        if (cfd < 0) throw std::runtime_error("coordinator: accept failed");
        set_nodelay(cfd);
        std::vector<uint8_t> body;
        put_u16(body, static_cast<uint16_t>(w));
        put_u16(body, static_cast<uint16_t>(workers));
        send_msg(cfd, 'W', body, "worker " + std::to_string(w));
        chans.push_back(std::make_unique<SocketChannel>(Fd(cfd), static_cast<uint16_t>(w)));
    }
    TrainResult res = coordinator_loop(std::move(model), train, val, cfg, chans);
    for (auto& t : threads)
        if (t.joinable()) t.join();
    for (const auto& err : worker_errors)
        if (!err.empty()) throw std::runtime_error("socket worker failed: " + err);
    return res;
}

}  // namespace rt
