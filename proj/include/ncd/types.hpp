#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ncd {

/// Working precision for everything held in memory. Files store f32.
using Scalar = double;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using ImageId = std::uint64_t;
/// Dense semantic class id; names live in a sidecar class table.
using ClassId = std::int32_t;

/// Axis-aligned box, (x, y) is the top-left corner, all in pixels.
struct BoxGeometry {
    Scalar x = 0;
    Scalar y = 0;
    Scalar w = 1;
    Scalar h = 1;

    bool valid() const noexcept;
    Scalar area() const noexcept { return w * h; }

    friend bool operator==(const BoxGeometry&, const BoxGeometry&) = default;
};

enum class Source : std::uint8_t { GT = 0, RPN = 1 };

/// Output of the frozen base classifier head for one box.
class BasePrediction {
public:
    static BasePrediction background() { return BasePrediction(kBackgroundCode); }
    static BasePrediction base_class(ClassId id) { return BasePrediction(static_cast<std::uint32_t>(id)); }
    static BasePrediction from_code(std::uint32_t code) { return BasePrediction(code); }

    bool is_background() const noexcept { return code_ == kBackgroundCode; }
    ClassId class_id() const noexcept { return static_cast<ClassId>(code_); }
    std::uint32_t code() const noexcept { return code_; }

    friend bool operator==(const BasePrediction&, const BasePrediction&) = default;

    static constexpr std::uint32_t kBackgroundCode = 0xFFFFFFFFu;

private:
    explicit BasePrediction(std::uint32_t code) : code_(code) {}
    std::uint32_t code_;
};

struct FeatureRecord {
    ImageId image_id = 0;
    BoxGeometry box;
    Vector feature;
    Source source = Source::RPN;
    std::optional<BasePrediction> base_pred;
    std::optional<Scalar> objectness;
    std::optional<ClassId> gt_class;
};

bool operator==(const FeatureRecord& a, const FeatureRecord& b);

/// K labeled base prototypes and Q discovered cluster centers sharing one feature space.
/// Prototypes are stored column-wise.
struct PrototypeSet {
    Eigen::Index dim = 0;
    std::vector<ClassId> base_ids;  // ascending, one per column of `base`
    Matrix base;                    // dim x K
    Matrix novel;                   // dim x Q
    std::map<std::string, std::string> metadata;

    Eigen::Index num_base() const noexcept { return base.cols(); }
    Eigen::Index num_novel() const noexcept { return novel.cols(); }

    /// Throws DomainError when an invariant does not hold.
    void validate() const;
};

enum class LabelKind : std::uint8_t { Background = 0, Base = 1, Cluster = 2, Mapped = 3, UnmappedNovel = 4 };

struct Label {
    LabelKind kind = LabelKind::Background;
    std::int32_t id = 0;  // class id for Base/Mapped, cluster index for Cluster/UnmappedNovel

    static Label background() { return {LabelKind::Background, 0}; }
    static Label base(ClassId c) { return {LabelKind::Base, c}; }
    static Label cluster(std::int32_t j) { return {LabelKind::Cluster, j}; }
    static Label mapped(ClassId c) { return {LabelKind::Mapped, c}; }
    static Label unmapped(std::int32_t j) { return {LabelKind::UnmappedNovel, j}; }

    auto operator<=>(const Label&) const = default;
};

std::string to_string(LabelKind kind);
LabelKind label_kind_from_string(const std::string& s);

struct Detection {
    ImageId image_id = 0;
    BoxGeometry box;
    Label label;
    Scalar score = 0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

enum class MappingMethod : std::uint8_t { Hungarian, Embedding };

struct LabelMapping {
    std::map<std::int32_t, ClassId> entries;  // cluster index -> semantic class id
    MappingMethod method = MappingMethod::Hungarian;
    int kappa = 0;  // only meaningful for Embedding

    std::optional<ClassId> lookup(std::int32_t cluster) const;

    friend bool operator==(const LabelMapping&, const LabelMapping&) = default;
};

enum class ClassKind : std::uint8_t { Base, Novel };

struct ClassInfo {
    ClassId id = 0;
    std::string name;
    ClassKind kind = ClassKind::Base;

    friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

using ClassTable = std::vector<ClassInfo>;

/// Precomputed embedding of one class name (e.g. from a vision-language text encoder).
struct TextEmbedding {
    ClassId class_id = 0;
    Vector embedding;
};

enum class FrequencySplit : std::uint8_t { Frequent, Common, Rare };

std::string to_string(FrequencySplit s);

struct ClassEval {
    ClassId id = 0;
    ClassKind kind = ClassKind::Base;
    FrequencySplit split = FrequencySplit::Frequent;
    double ap = 0;                  // mean over iou_thresholds
    std::vector<double> ap_per_iou;  // parallel to EvalReport::iou_thresholds
    std::size_t gt_instances = 0;
    std::size_t gt_images = 0;
};

struct ClassAgnosticMetrics {
    double any_label = 0;          // any predicted label vs all GT
    double novel_as_novel = 0;     // novel predictions vs novel GT
    double base_gt_as_novel = 0;   // novel predictions vs base GT
    double novel_gt_as_base = 0;   // base predictions vs novel GT
};

struct EvalReport {
    std::vector<ClassEval> per_class;  // ascending class id, only classes with GT
    double map_base = 0;
    double map_novel = 0;
    double map_all = 0;
    std::optional<double> map_frequent;
    std::optional<double> map_common;
    std::optional<double> map_rare;
    std::vector<double> iou_thresholds;
    std::optional<ClassAgnosticMetrics> class_agnostic;

    const ClassEval* find(ClassId id) const;
};

}  // namespace ncd
