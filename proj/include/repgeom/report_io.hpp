#pragma once

#include "repgeom/id_twonn.hpp"
#include "repgeom/overlap.hpp"
#include "repgeom/profiles.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace repgeom {

/// Shortest decimal that round-trips the double ("%.17g" trimmed).
std::string format_number(double v);

/// `layer_id,relative_depth,id_mean,id_std,method,scale,n_dropped_duplicates`
std::string id_profile_csv(const std::vector<LayerIdPoint>& profile);

struct OverlapRow {
    std::uint32_t layer_id = 0;
    double relative_depth = 0.0;
    OverlapValue overlap;
};

/// `layer_id,relative_depth,kind,k,value`
std::string overlap_csv(const std::vector<OverlapRow>& rows);

std::vector<LayerIdPoint> report_id_points(const ProfileReport& report);
std::vector<OverlapRow> report_consecutive_rows(const ProfileReport& report);
std::vector<OverlapRow> report_gt_rows(const ProfileReport& report);

/// JSON with a fixed key order; byte-identical for identical reports.
std::string report_json(const ProfileReport& report, const std::string& manifest, const std::string& labels_path);

struct PlotFiles {
    std::string id_profile;
    std::string overlap_consecutive;
    std::string overlap_gt;  // empty without labels
};
PlotFiles report_plots(const ProfileReport& report);

/// Collects output files in a scratch directory and moves them into place only
/// on commit(); an uncommitted writer removes its scratch directory.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path out_dir);
    ~ArtifactWriter();
    ArtifactWriter(const ArtifactWriter&) = delete;
    ArtifactWriter& operator=(const ArtifactWriter&) = delete;

    void add(const std::string& name, const std::string& content);
    /// Registers a file already written into scratch_dir().
    void adopt(const std::string& name);
    /// Returns the final path of every file, in the order added.
    std::vector<std::filesystem::path> commit();

    const std::filesystem::path& scratch_dir() const noexcept { return scratch_; }

private:
    std::filesystem::path out_dir_;
    std::filesystem::path scratch_;
    std::vector<std::string> names_;
    bool committed_ = false;
};

}  // namespace repgeom
