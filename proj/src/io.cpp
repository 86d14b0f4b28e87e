#include "spadfuse/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "spadfuse/errors.hpp"

namespace spadfuse::io {

namespace {

static_assert(std::endian::native == std::endian::little, "payload codecs assume a little-endian host");

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) throw DataError("payload truncated");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    const char* take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw DataError("payload truncated");
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_;
};

std::string with_header(const json& header, const std::string& payload) {
    return header.dump() + "\n" + payload;
}

// Splits a container file into its header and the payload offset.
json split_header(const std::string& bytes, std::size_t& payload_offset, const fs::path& path) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw DataError(path.string() + ": missing JSON header line");
    try {
        json h = json::parse(bytes.substr(0, nl));
        payload_offset = nl + 1;
        return h;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": bad JSON header: " + e.what());
    }
}

template <typename T>
T field(const json& j, const char* key, const fs::path& path) {
    if (!j.contains(key)) throw DataError(path.string() + ": header lacks '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": header field '" + key + "': " + e.what());
    }
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot open " + tmp.string() + " for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw DataError("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

json to_json(const SensorParams& p) {
    return json{{"q", p.q},           {"T_bin", p.T_bin},     {"tau", p.tau},
                {"phi_dark", p.phi_dark}, {"n_fwc", p.n_fwc}, {"T_exp", p.T_exp},
                {"sigma_f", p.sigma_f}, {"c", p.c},           {"sigma_theta", p.sigma_theta},
                {"rho", p.rho},         {"sigma_iso", p.sigma_iso}, {"sigma_shot", p.sigma_shot},
                {"phi_0", p.phi_0},     {"rho_ref", p.rho_ref}, {"R_bar", p.R_bar},
                {"N_0", p.N_0}};
}

SensorParams sensor_params_from_json(const json& j, SensorParams p) {
    if (!j.is_object()) throw ConfigError("sensor parameters must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!value.is_number()) throw ConfigError("sensor parameter '" + key + "' must be a number");
        const double v = value.get<double>();
        if (key == "q") p.q = v;
        else if (key == "T_bin") p.T_bin = v;
        else if (key == "tau") p.tau = v;
        else if (key == "phi_dark") p.phi_dark = v;
        else if (key == "n_fwc") p.n_fwc = v;
        else if (key == "T_exp") p.T_exp = v;
        else if (key == "sigma_f") p.sigma_f = v;
        else if (key == "c") p.c = v;
        else if (key == "sigma_theta") p.sigma_theta = v;
        else if (key == "rho") p.rho = v;
        else if (key == "sigma_iso") p.sigma_iso = v;
        else if (key == "sigma_shot") p.sigma_shot = v;
        else if (key == "phi_0") p.phi_0 = v;
        else if (key == "rho_ref") p.rho_ref = v;
        else if (key == "R_bar") p.R_bar = v;
        else if (key == "N_0") p.N_0 = v;
        else throw ConfigError("unknown sensor parameter '" + key + "'");
    }
    p.validate();
    return p;
}

void write_raw_image(const fs::path& path, const Image& image) {
    fs::path sidecar = path;
    sidecar.replace_extension(".f32");
    std::string payload;
    payload.reserve(image.size() * 4);
    for (double v : image.values()) put(payload, static_cast<float>(v));
    write_atomic(sidecar, payload);
    const json header{{"width", image.width()}, {"height", image.height()}, {"dtype", "float32"},
                      {"data", sidecar.filename().string()}};
    write_atomic(path, header.dump(2) + "\n");
}

Image read_raw_image(const fs::path& path) {
    json h;
    try {
        h = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    const int w = field<int>(h, "width", path);
    const int hh = field<int>(h, "height", path);
    if (field<std::string>(h, "dtype", path) != "float32") throw DataError(path.string() + ": dtype must be float32");
    fs::path sidecar = path;
    sidecar.replace_extension(".f32");
    if (h.contains("data")) sidecar = path.parent_path() / h.at("data").get<std::string>();
    const std::string bytes = read_file(sidecar);
    if (w <= 0 || hh <= 0 || bytes.size() != static_cast<std::size_t>(w) * hh * 4) {
        throw DataError(sidecar.string() + ": payload size does not match header");
    }
    Image img(w, hh);
    Reader r(bytes, 0);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = r.get<float>();
    return img;
}

void write_trajectory(const fs::path& path, const Trajectory& trajectory) {
    json list = json::array();
    for (const auto& k : trajectory.keys()) list.push_back({{"t", k.t}, {"dx", k.dx}, {"dy", k.dy}, {"theta", k.theta}});
    write_atomic(path, list.dump(2) + "\n");
}

Trajectory read_trajectory(const fs::path& path) {
    json list;
    try {
        list = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (!list.is_array()) throw DataError(path.string() + ": trajectory must be a JSON list");
    std::vector<Pose> keys;
    for (const auto& k : list) {
        keys.push_back(Pose{field<double>(k, "t", path), k.value("dx", 0.0), k.value("dy", 0.0), k.value("theta", 0.0)});
    }
    return Trajectory(std::move(keys));
}

void write_binary_frames(const fs::path& path, const std::vector<SpadBinaryFrame>& frames, const SensorParams& params) {
    const int w = frames.empty() ? 0 : frames.front().bits.width();
    const int h = frames.empty() ? 0 : frames.front().bits.height();
    const std::size_t bytes_per_frame = (static_cast<std::size_t>(w) * h + 7) / 8;
    std::string payload(bytes_per_frame * frames.size(), '\0');
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const auto& bits = frames[k].bits;
        if (bits.width() != w || bits.height() != h) throw DataError("binary frames differ in shape");
        char* out = payload.data() + k * bytes_per_frame;
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i] != 0) out[i / 8] = static_cast<char>(static_cast<unsigned char>(out[i / 8]) | (1u << (i % 8)));
        }
    }
    const json header{{"format", "spad_binary"},
                      {"width", w},
                      {"height", h},
                      {"T_bin", params.T_bin},
                      {"t_start", frames.empty() ? 0.0 : frames.front().t_start},
                      {"n_frames", frames.size()},
                      {"bit_order", "lsb_first"}};
    write_atomic(path, with_header(header, payload));
}

std::vector<SpadBinaryFrame> read_binary_frames(const fs::path& path, double* t_bin) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    const json h = split_header(bytes, offset, path);
    const int w = field<int>(h, "width", path);
    const int hh = field<int>(h, "height", path);
    const double tb = field<double>(h, "T_bin", path);
    const double t_start = field<double>(h, "t_start", path);
    const auto n = field<std::size_t>(h, "n_frames", path);
    const std::size_t bytes_per_frame = (static_cast<std::size_t>(w) * hh + 7) / 8;
    if (bytes.size() - offset != bytes_per_frame * n) throw DataError(path.string() + ": payload size mismatch");
    if (t_bin != nullptr) *t_bin = tb;
    std::vector<SpadBinaryFrame> frames;
    frames.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        SpadBinaryFrame f{t_start + static_cast<double>(k) * tb, Grid<std::uint8_t>(w, hh)};
        const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + offset + k * bytes_per_frame);
        for (std::size_t i = 0; i < f.bits.size(); ++i) f.bits[i] = (src[i / 8] >> (i % 8)) & 1u;
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_aggregates(const fs::path& path, const std::vector<SpadAggregateFrame>& frames, const SensorParams& params) {
    const int w = frames.empty() ? 0 : frames.front().counts.width();
    const int h = frames.empty() ? 0 : frames.front().counts.height();
    const int n_bins = frames.empty() ? 0 : frames.front().n_bins;
    std::string payload;
    json centers = json::array();
    for (const auto& f : frames) {
        if (f.counts.width() != w || f.counts.height() != h || f.n_bins != n_bins) {
            throw DataError("aggregate frames differ in shape or n_bins");
        }
        centers.push_back(f.t_center);
        for (auto c : f.counts.values()) put(payload, c);
    }
    const json header{{"format", "spad_aggregate"}, {"width", w},           {"height", h},
                      {"dtype", "uint16"},          {"T_bin", params.T_bin}, {"n_bins", n_bins},
                      {"t_center", centers}};
    write_atomic(path, with_header(header, payload));
}

std::vector<SpadAggregateFrame> read_aggregates(const fs::path& path) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    const json h = split_header(bytes, offset, path);
    const int w = field<int>(h, "width", path);
    const int hh = field<int>(h, "height", path);
    const double tb = field<double>(h, "T_bin", path);
    const int n_bins = field<int>(h, "n_bins", path);
    const auto centers = field<std::vector<double>>(h, "t_center", path);
    const std::size_t per_frame = static_cast<std::size_t>(w) * hh;
    if (bytes.size() - offset != per_frame * 2 * centers.size()) throw DataError(path.string() + ": payload size mismatch");
    Reader r(bytes, offset);
    std::vector<SpadAggregateFrame> frames;
    for (double tc : centers) {
        SpadAggregateFrame f{tc, n_bins * tb, n_bins, Grid<std::uint16_t>(w, hh)};
        for (std::size_t i = 0; i < per_frame; ++i) {
            f.counts[i] = r.get<std::uint16_t>();
            if (f.counts[i] > n_bins) throw DataError(path.string() + ": count exceeds n_bins");
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_events(const fs::path& path, const EventStream& stream, const std::string& params_hash) {
    // Quantizing to microseconds can tie events from different pixels, so
    // re-sort to keep the file in (t, y, x) order.
    std::vector<std::pair<std::uint64_t, Event>> records;
    records.reserve(stream.events.size());
    for (const Event& e : stream.events) records.emplace_back(static_cast<std::uint64_t>(std::llround(e.t * 1e6)), e);
    std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        if (a.second.y != b.second.y) return a.second.y < b.second.y;
        return a.second.x < b.second.x;
    });
    std::string payload;
    payload.reserve(stream.events.size() * 16);
    for (const auto& [us, e] : records) {
        put(payload, us);
        put(payload, e.x);
        put(payload, e.y);
        put(payload, e.polarity);
        payload.append(3, '\0');
    }
    const json header{{"format", "events"},
                      {"width", stream.width},
                      {"height", stream.height},
                      {"t_span", {stream.t0, stream.t1}},
                      {"n_events", stream.events.size()},
                      {"record", "t:u64_us,x:u16,y:u16,polarity:i8,pad:3"},
                      {"params_hash", params_hash}};
    write_atomic(path, with_header(header, payload));
}

EventStream read_events(const fs::path& path) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    const json h = split_header(bytes, offset, path);
    EventStream s;
    s.width = field<int>(h, "width", path);
    s.height = field<int>(h, "height", path);
    const auto span = field<std::vector<double>>(h, "t_span", path);
    if (span.size() != 2) throw DataError(path.string() + ": t_span must have two entries");
    s.t0 = span[0];
    s.t1 = span[1];
    const auto n = field<std::size_t>(h, "n_events", path);
    if (bytes.size() - offset != n * 16) throw DataError(path.string() + ": payload size mismatch");
    Reader r(bytes, offset);
    s.events.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Event e;
        e.t = static_cast<double>(r.get<std::uint64_t>()) * 1e-6;
        e.x = r.get<std::uint16_t>();
        e.y = r.get<std::uint16_t>();
        e.polarity = r.get<std::int8_t>();
        r.take(3);
        s.events.push_back(e);
    }
    s.t0 = std::min(s.t0, std::floor(s.t0 * 1e6) * 1e-6);
    s.t1 = std::max(s.t1, std::ceil(s.t1 * 1e6) * 1e-6);
    s.validate();
    return s;
}

void write_events_csv(const fs::path& path, const EventStream& stream) {
    std::ostringstream out;
    out << "t,x,y,polarity\n" << std::setprecision(17);
    for (const Event& e : stream.events) out << e.t << ',' << e.x << ',' << e.y << ',' << int(e.polarity) << '\n';
    write_atomic(path, out.str());
}

EventStream read_events_csv(const fs::path& path, int width, int height, double t0, double t1) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    if (line.rfind("t,x,y,polarity", 0) != 0) throw DataError(path.string() + ": expected header t,x,y,polarity");
    EventStream s;
    s.width = width;
    s.height = height;
    s.t0 = t0;
    s.t1 = t1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double t = 0;
        int x = 0, y = 0, p = 0;
        char c1 = 0, c2 = 0, c3 = 0;
        std::istringstream row(line);
        if (!(row >> t >> c1 >> x >> c2 >> y >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',') {
            throw DataError(path.string() + ": malformed row '" + line + "'");
        }
        if (x < 0 || y < 0 || x > 65535 || y > 65535) throw DataError(path.string() + ": coordinate out of range");
        s.events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), static_cast<std::int8_t>(p)});
    }
    s.validate();
    return s;
}

void write_float_image(const fs::path& path, const Image& image, json header) {
    header["width"] = image.width();
    header["height"] = image.height();
    header["dtype"] = "float32";
    std::string payload;
    payload.reserve(image.size() * 4);
    for (double v : image.values()) put(payload, static_cast<float>(v));
    write_atomic(path, with_header(header, payload));
}

Image read_float_image(const fs::path& path, json* header) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    const json h = split_header(bytes, offset, path);
    const int w = field<int>(h, "width", path);
    const int hh = field<int>(h, "height", path);
    if (bytes.size() - offset != static_cast<std::size_t>(w) * hh * 4) throw DataError(path.string() + ": payload size mismatch");
    Image img(w, hh);
    Reader r(bytes, offset);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = r.get<float>();
    if (header != nullptr) *header = h;
    return img;
}

void write_latent(const fs::path& path, const LatentImage& latent) {
    write_float_image(path, latent.n_latent,
                      json{{"format", "latent"}, {"f", latent.f}, {"T", latent.T}, {"method", to_string(latent.method)},
                           {"tol", latent.tol}});
}

LatentImage read_latent(const fs::path& path) {
    json h;
    LatentImage l;
    l.n_latent = read_float_image(path, &h);
    l.f = field<double>(h, "f", path);
    l.T = field<double>(h, "T", path);
    l.tol = field<double>(h, "tol", path);
    const auto m = field<std::string>(h, "method", path);
    if (m == "EDI") l.method = DeblurMethod::EDI;
    else if (m == "NEDI") l.method = DeblurMethod::NEDI;
    else throw DataError(path.string() + ": unknown method " + m);
    l.saturated = Grid<std::uint8_t>(l.n_latent.width(), l.n_latent.height());
    return l;
}

void write_image_stack(const fs::path& path, const ImageStack& stack, json header) {
    if (stack.times.size() != stack.images.size()) throw DataError("image stack times and images differ in length");
    const int w = stack.images.empty() ? 0 : stack.images.front().width();
    const int h = stack.images.empty() ? 0 : stack.images.front().height();
    std::string payload;
    payload.reserve(stack.images.size() * static_cast<std::size_t>(w) * h * 4);
    for (const Image& img : stack.images) {
        if (img.width() != w || img.height() != h) throw DataError("image stack frames differ in shape");
        for (double v : img.values()) put(payload, static_cast<float>(v));
    }
    header["width"] = w;
    header["height"] = h;
    header["dtype"] = "float32";
    header["times"] = stack.times;
    write_atomic(path, with_header(header, payload));
}

ImageStack read_image_stack(const fs::path& path, json* header) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    const json h = split_header(bytes, offset, path);
    const int w = field<int>(h, "width", path);
    const int hh = field<int>(h, "height", path);
    ImageStack stack;
    stack.times = field<std::vector<double>>(h, "times", path);
    const std::size_t per_frame = static_cast<std::size_t>(w) * hh;
    if (bytes.size() - offset != per_frame * 4 * stack.times.size()) {
        throw DataError(path.string() + ": payload size mismatch");
    }
    Reader r(bytes, offset);
    for (std::size_t k = 0; k < stack.times.size(); ++k) {
        Image img(w, hh);
        for (std::size_t i = 0; i < per_frame; ++i) img[i] = r.get<float>();
        stack.images.push_back(std::move(img));
    }
    if (header != nullptr) *header = h;
    return stack;
}

}  // namespace spadfuse::io
