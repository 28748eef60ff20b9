#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "panm/errors.hpp"
#include "panm/learner.hpp"
#include "panm/rng.hpp"

namespace panm::learner {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::uint64_t kPurposeIngest = 103;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open file: " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off,
                        const std::string& path) {
    if (off + 4 > buf.size())
        throw IngestError(path + ": truncated at byte offset " + std::to_string(off));
    return (static_cast<std::uint32_t>(buf[off]) << 24) |
           (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
           static_cast<std::uint32_t>(buf[off + 3]);
}

struct RawImages {
    std::vector<double> pixels;  // count * side * side, scaled to [0,1]
    std::vector<int> labels;
    int count = 0;
    int side = 0;
    int num_classes = 0;
};

RawImages load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    if (read_be32(img, 0, images_path) != kIdxImagesMagic)
        throw IngestError(images_path + ": bad magic at byte offset 0");
    const std::uint32_t count = read_be32(img, 4, images_path);
    const std::uint32_t rows = read_be32(img, 8, images_path);
    const std::uint32_t cols = read_be32(img, 12, images_path);
    if (rows != cols)
        throw IngestError(images_path + ": images not square at byte offset 8");
    const std::size_t need = 16 + static_cast<std::size_t>(count) * rows * cols;
    if (img.size() != need)
        throw IngestError(images_path + ": size mismatch at byte offset " +
                          std::to_string(std::min(img.size(), need)));

    if (read_be32(lab, 0, labels_path) != kIdxLabelsMagic)
        throw IngestError(labels_path + ": bad magic at byte offset 0");
    const std::uint32_t lab_count = read_be32(lab, 4, labels_path);
    if (lab_count != count)
        throw IngestError(labels_path + ": label count mismatch at byte offset 4");
    if (lab.size() != 8 + static_cast<std::size_t>(count))
        throw IngestError(labels_path + ": size mismatch at byte offset " +
                          std::to_string(std::min(lab.size(), std::size_t{8} + count)));

    RawImages out;
    out.count = static_cast<int>(count);
    out.side = static_cast<int>(rows);
    out.pixels.resize(static_cast<std::size_t>(count) * rows * cols);
    out.labels.resize(count);
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = img[16 + i] / 255.0;
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        out.labels[i] = lab[8 + i];
        max_label = std::max(max_label, out.labels[i]);
    }
    out.num_classes = max_label + 1;
    return out;
}

RawImages load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open file: " + path);

    RawImages out;
    std::string line;
    std::size_t offset = 0;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(ss, cell, ','))
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IngestError(path + ": unparseable cell at byte offset " +
                                  std::to_string(line_start));
            }
        if (values.size() < 2)
            throw IngestError(path + ": row too short at byte offset " +
                              std::to_string(line_start));
        const int label = static_cast<int>(values[0]);
        const int pix = static_cast<int>(values.size()) - 1;
        const int side = static_cast<int>(std::lround(std::sqrt(pix)));
        if (side * side != pix)
            throw IngestError(path + ": non-square pixel count at byte offset " +
                              std::to_string(line_start));
        if (out.count == 0)
            out.side = side;
        else if (side != out.side)
            throw IngestError(path + ": inconsistent image size at byte offset " +
                              std::to_string(line_start));
        if (label < 0)
            throw IngestError(path + ": negative label at byte offset " +
                              std::to_string(line_start));
        out.labels.push_back(label);
        for (int i = 0; i < pix; ++i) out.pixels.push_back(values[1 + i] / 255.0);
        ++out.count;
        out.num_classes = std::max(out.num_classes, label + 1);
        (void)line_no;
    }
    if (out.count == 0) throw IngestError(path + ": empty file at byte offset 0");
    return out;
}

}  // namespace

std::vector<double> rotate_quarter(const std::vector<double>& pixels, int side,
                                   int turns) {
    if (side < 1) throw ContractError("rotate_quarter: side must be >= 1");
    if (pixels.size() != static_cast<std::size_t>(side) * side)
        throw ContractError("rotate_quarter: pixel count mismatch");
    turns = ((turns % 4) + 4) % 4;
    std::vector<double> cur = pixels;
    std::vector<double> next(pixels.size());
    for (int t = 0; t < turns; ++t) {
        // One counterclockwise turn: out(r,c) = in(c, side-1-r).
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c)
                next[static_cast<std::size_t>(r) * side + c] =
                    cur[static_cast<std::size_t>(c) * side + (side - 1 - r)];
        cur.swap(next);
    }
    return cur;
}

TaskSet ingest_external_images(const IngestParams& p) {
    if (p.n < 1) throw ConfigError("ingest: n must be >= 1");
    if (p.r < 1) throw ConfigError("ingest: r must be >= 1");
    if (p.n % p.r != 0) throw ConfigError("ingest: n must be divisible by r");
    if (p.train_per_client < 1) throw ConfigError("ingest: train_per_client must be >= 1");
    if (p.test_per_client < 1) throw ConfigError("ingest: test_per_client must be >= 1");
    std::vector<int> turns = p.quarter_turns_per_cluster;
    if (turns.empty()) {
        turns.resize(p.r);
        for (int j = 0; j < p.r; ++j) turns[j] = j * 4 / p.r;
    }
    if (static_cast<int>(turns.size()) != p.r)
        throw ConfigError("ingest: quarter_turns_per_cluster size must equal r");

    RawImages raw = p.format == IngestFormat::idx
                        ? load_idx(p.images_path, p.labels_path)
                        : load_csv(p.images_path);

    const int per_client = p.train_per_client + p.test_per_client;
    const long long need = static_cast<long long>(per_client) * p.n;
    if (raw.count < need)
        throw ConfigError("ingest: dataset has " + std::to_string(raw.count) +
                          " images, needs " + std::to_string(need));

    std::vector<int> order(raw.count);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(p.seed, 0, 0, kPurposeIngest));
    std::shuffle(order.begin(), order.end(), rng);

    const int dim = raw.side * raw.side;
    const int per_cluster = p.n / p.r;
    TaskSet out;
    out.clients.resize(p.n);
    out.cluster_of.resize(p.n);

    int cursor = 0;
    std::vector<double> image(dim);
    for (int i = 0; i < p.n; ++i) {
        const int cluster = i / per_cluster;
        out.cluster_of[i] = cluster;
        ClientTask& task = out.clients[i];
        task.cluster_id = cluster;
        for (Dataset* ds : {&task.train, &task.test}) {
            const int count = ds == &task.train ? p.train_per_client : p.test_per_client;
            ds->rows = count;
            ds->cols = dim;
            ds->num_classes = raw.num_classes;
            ds->features.resize(static_cast<std::size_t>(count) * dim);
            ds->labels.resize(count);
            for (int s = 0; s < count; ++s) {
                const int src = order[cursor++];
                std::copy_n(raw.pixels.begin() + static_cast<std::size_t>(src) * dim,
                            dim, image.begin());
                const auto rotated = rotate_quarter(image, raw.side, turns[cluster]);
                std::copy(rotated.begin(), rotated.end(),
                          ds->features.begin() + static_cast<std::size_t>(s) * dim);
                ds->labels[s] = raw.labels[src];
            }
        }
    }
    return out;
}

}  // namespace panm::learner
