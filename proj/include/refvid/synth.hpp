#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refvid/geometry.hpp"
#include "refvid/metrics.hpp"
#include "refvid/rng.hpp"
#include "refvid/tensor.hpp"

namespace refvid {

enum class ShapeKind { Square, Circle, Triangle };
enum class ColorKind { Red, Green, Blue, Yellow };
enum class ActionKind { MoveLeft, MoveRight, MoveUp, MoveDown, Grow, Shrink };

const char* to_word(ShapeKind s);
const char* to_word(ColorKind c);
std::vector<std::string> action_phrase(ActionKind a);

struct ActorSpec {
    ShapeKind shape = ShapeKind::Square;
    ColorKind color = ColorKind::Red;
    ActionKind action = ActionKind::MoveLeft;
    Box start_box;
    double velocity = 1.0; // px/frame for moves, scale rate/frame for grow/shrink

    bool is_translation() const {
        return action != ActionKind::Grow && action != ActionKind::Shrink;
    }
    /// Center and size of the shape at frame t.
    void geometry_at(int t, double& cx, double& cy, double& size) const;
    Box box_at(int t) const;
    bool same_triple(const ActorSpec& o) const {
        return shape == o.shape && color == o.color && action == o.action;
    }
};

struct GenConfig {
    int width = 32;
    int height = 32;
    int frames = 6;        // T
    int proposals = 6;     // K
    int actors_min = 2;
    int actors_max = 4;
    int embed_dim = 32;    // width of the frozen embedding table
    int max_query_len = 20;
    uint64_t vocab_seed = 9001;

    void validate() const;
    int annotated_frame() const { return frames / 2; }
};

// Flow channels are (dx, dy, magnitude) / kFlowNorm; max speed 4 px/frame
// with a safety factor of 2 keeps channels within [-0.5, 0.5].
inline constexpr double kFlowNorm = 8.0;

struct VideoSample {
    Tensor frames;                 // [T,3,H,W] RGB in [0,1]
    Tensor flow;                   // [T,3,H,W]
    int annotated_t = 0;
    std::vector<int> query_tokens; // <= max_query_len ids
    std::string query_text;
    std::vector<Box> proposals;    // K boxes
    Mask gt_mask;                  // at annotated_t
    int gt_index = 0;
    Box gt_box;

    // generation-side metadata, not serialized
    std::vector<ActorSpec> actors;
    int referent = 0;
};

struct Vocab {
    std::vector<std::string> tokens; // index 0 is the padding token
    std::map<std::string, int> ids;
    Tensor table; // [V, embed_dim], unit-norm rows, zero pad row

    int size() const { return static_cast<int>(tokens.size()); }
    int id(const std::string& word) const;
};

/// Closed vocabulary over all template words; rows are seeded pseudo-random
/// unit vectors, deterministic per cfg.vocab_seed.
Vocab build_vocab(const GenConfig& cfg);

VideoSample generate_sample(uint64_t seed, const GenConfig& cfg, const Vocab& vocab);
VideoSample generate_sample(uint64_t seed, const GenConfig& cfg);

/// Rasterize one actor's own shape mask at frame t (ignores occlusion).
Mask render_actor_mask(const ActorSpec& actor, int t, const GenConfig& cfg);

// On-disk dataset ------------------------------------------------------------

inline constexpr int kDatasetFormatVersion = 1;

struct SampleRecord {
    std::string id;
    std::string dir;
    int gt_index = 0;
    int annotated_t = 0;
    Box gt_box;
    std::string query_text;
    std::string split; // "train" | "test"
    std::vector<int> frames_shape, flow_shape, mask_shape;
};

struct DatasetManifest {
    int format_version = kDatasetFormatVersion;
    GenConfig cfg;
    std::vector<SampleRecord> samples;

    std::vector<size_t> split_indices(const std::string& split) const;
};

void write_sample(const std::filesystem::path& dir, const VideoSample& s);
VideoSample read_sample(const std::filesystem::path& root, const SampleRecord& rec);

/// Generate n samples with seeds seed..seed+n-1; writes manifest.json,
/// vocab.json and embeddings.bin; 80/20 train/test split by sample index.
void generate_dataset(uint64_t seed, int n, const GenConfig& cfg,
                      const std::filesystem::path& dir);

DatasetManifest read_manifest(const std::filesystem::path& dir);
Vocab read_vocab(const std::filesystem::path& dir);

void write_vocab(const std::filesystem::path& dir, const Vocab& vocab, const GenConfig& cfg);

} // namespace refvid
