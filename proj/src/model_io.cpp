#include "sdf4d/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sdf4d {

namespace {

constexpr const char* kMagic = "SDF4D_MODEL";

std::string format_double(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

void append_line(std::string& header, const std::string& key, const std::string& value) {
    header += key;
    header += " = ";
    header += value;
    header += '\n';
}

void append_summary(std::string& header, const std::string& name, const ComponentSummary& s) {
    append_line(header, "loss_" + name + "_min", format_double(s.min));
    append_line(header, "loss_" + name + "_final", format_double(s.final));
    append_line(header, "loss_" + name + "_epoch_of_min", std::to_string(s.epoch_of_min));
}

class HeaderReader {
public:
    explicit HeaderReader(const std::string& text, const std::string& context)
        : context_(context) {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto at = line.find(" = ");
            if (at == std::string::npos)
                throw std::runtime_error(context_ + ": malformed header line '" + line + "'");
            fields_[line.substr(0, at)] = line.substr(at + 3);
        }
    }

    const std::string& get(const std::string& key) const {
        const auto it = fields_.find(key);
        if (it == fields_.end())
            throw std::runtime_error(context_ + ": missing header field '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key) const {
        try {
            return std::stod(get(key));
        } catch (const std::logic_error&) {
            throw std::runtime_error(context_ + ": bad numeric value for '" + key + "'");
        }
    }

    long get_long(const std::string& key) const {
        try {
            return std::stol(get(key));
        } catch (const std::logic_error&) {
            throw std::runtime_error(context_ + ": bad integer value for '" + key + "'");
        }
    }

    ComponentSummary get_summary(const std::string& name) const {
        ComponentSummary s;
        s.min = get_double("loss_" + name + "_min");
        s.final = get_double("loss_" + name + "_final");
        s.epoch_of_min = static_cast<int>(get_long("loss_" + name + "_epoch_of_min"));
        return s;
    }

private:
    std::string context_;
    std::map<std::string, std::string> fields_;
};

}  // namespace

void save_model(const std::filesystem::path& path, const ModelArtifact& artifact) {
    artifact.mlp.validate();
    artifact.training.validate();
    artifact.transform.validate();
    if (artifact.params.config() != artifact.mlp)
        throw std::invalid_argument("save_model: parameters do not match the MLP config");

    std::string header;
    append_line(header, "format_version", std::to_string(artifact.format_version));
    append_line(header, "patient_id", artifact.patient_id);
    append_line(header, "hidden_layers", std::to_string(artifact.mlp.hidden_layers));
    append_line(header, "width", std::to_string(artifact.mlp.width));
    append_line(header, "skip_layer_index", std::to_string(artifact.mlp.skip_layer_index));
    append_line(header, "activation", "relu");
    append_line(header, "center_mm",
                format_double(artifact.transform.center_mm.x()) + " " +
                    format_double(artifact.transform.center_mm.y()) + " " +
                    format_double(artifact.transform.center_mm.z()));
    append_line(header, "scale_mm", format_double(artifact.transform.scale_mm));
    append_line(header, "t0_days", format_double(artifact.transform.t0_days));
    append_line(header, "time_scale_days", format_double(artifact.transform.time_scale_days));
    append_line(header, "epochs", std::to_string(artifact.training.epochs));
    append_line(header, "learning_rate", format_double(artifact.training.learning_rate));
    append_line(header, "lambda1", format_double(artifact.training.weights.lambda1));
    append_line(header, "lambda2", format_double(artifact.training.weights.lambda2));
    append_line(header, "lambda3", format_double(artifact.training.weights.lambda3));
    append_line(header, "lambda4", format_double(artifact.training.weights.lambda4));
    append_line(header, "on_surface_batch",
                artifact.training.on_surface_batch
                    ? std::to_string(*artifact.training.on_surface_batch)
                    : std::string("full-cloud"));
    append_line(header, "off_surface_per_on_surface",
                format_double(artifact.training.off_surface_per_on_surface));
    append_line(header, "n_reg_times_per_step",
                std::to_string(artifact.training.n_reg_times_per_step));
    append_line(header, "adam_beta1", format_double(artifact.training.adam_beta1));
    append_line(header, "adam_beta2", format_double(artifact.training.adam_beta2));
    append_line(header, "adam_epsilon", format_double(artifact.training.adam_epsilon));
    append_line(header, "rng_seed", std::to_string(artifact.training.rng_seed));
    append_summary(header, "data_abs", artifact.loss_summary.data_abs);
    append_summary(header, "eikonal_data", artifact.loss_summary.eikonal_data);
    append_summary(header, "temporal_data", artifact.loss_summary.temporal_data);
    append_summary(header, "eikonal_reg", artifact.loss_summary.eikonal_reg);
    append_summary(header, "temporal_reg", artifact.loss_summary.temporal_reg);
    append_summary(header, "total", artifact.loss_summary.total);
    append_line(header, "parameter_count", std::to_string(artifact.params.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path.string());
    out << kMagic << " v" << artifact.format_version << " header_bytes=" << header.size()
        << '\n';
    out << header;

    static_assert(sizeof(double) == 8);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(artifact.params.flat().data()),
                  static_cast<std::streamsize>(sizeof(double)) * artifact.params.size());
    } else {
        for (long i = 0; i < artifact.params.size(); ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &artifact.params.flat()[i], 8);
            char bytes[8];
            for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>(bits >> (8 * b));
            out.write(bytes, 8);
        }
    }
    if (!out) throw std::runtime_error("save_model: write failed for " + path.string());
}

ModelArtifact load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path.string());
    const std::string context = "load_model(" + path.string() + ")";

    std::string first_line;
    if (!std::getline(in, first_line)) throw std::runtime_error(context + ": empty file");
    int version = 0;
    std::size_t header_bytes = 0;
    {
        std::istringstream parse(first_line);
        std::string magic, version_token, header_token;
        parse >> magic >> version_token >> header_token;
        if (magic != kMagic || version_token.size() < 2 || version_token[0] != 'v' ||
            header_token.rfind("header_bytes=", 0) != 0)
            throw std::runtime_error(context + ": not a model file");
        version = std::stoi(version_token.substr(1));
        header_bytes = static_cast<std::size_t>(std::stoul(header_token.substr(13)));
    }
    if (version != 1) throw std::runtime_error(context + ": unsupported format version");

    std::string header(header_bytes, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_bytes));
    if (in.gcount() != static_cast<std::streamsize>(header_bytes))
        throw std::runtime_error(context + ": truncated header");

    const HeaderReader reader(header, context);
    ModelArtifact artifact;
    artifact.format_version = static_cast<int>(reader.get_long("format_version"));
    artifact.patient_id = reader.get("patient_id");
    artifact.mlp.hidden_layers = static_cast<int>(reader.get_long("hidden_layers"));
    artifact.mlp.width = static_cast<int>(reader.get_long("width"));
    artifact.mlp.skip_layer_index = static_cast<int>(reader.get_long("skip_layer_index"));
    if (reader.get("activation") != "relu")
        throw std::runtime_error(context + ": unsupported activation");
    {
        std::istringstream parse(reader.get("center_mm"));
        if (!(parse >> artifact.transform.center_mm.x() >> artifact.transform.center_mm.y() >>
              artifact.transform.center_mm.z()))
            throw std::runtime_error(context + ": bad center_mm");
    }
    artifact.transform.scale_mm = reader.get_double("scale_mm");
    artifact.transform.t0_days = reader.get_double("t0_days");
    artifact.transform.time_scale_days = reader.get_double("time_scale_days");
    artifact.training.epochs = static_cast<int>(reader.get_long("epochs"));
    artifact.training.learning_rate = reader.get_double("learning_rate");
    artifact.training.weights.lambda1 = reader.get_double("lambda1");
    artifact.training.weights.lambda2 = reader.get_double("lambda2");
    artifact.training.weights.lambda3 = reader.get_double("lambda3");
    artifact.training.weights.lambda4 = reader.get_double("lambda4");
    if (const std::string& batch = reader.get("on_surface_batch"); batch != "full-cloud")
        artifact.training.on_surface_batch = static_cast<int>(std::stol(batch));
    artifact.training.off_surface_per_on_surface =
        reader.get_double("off_surface_per_on_surface");
    artifact.training.n_reg_times_per_step =
        static_cast<int>(reader.get_long("n_reg_times_per_step"));
    artifact.training.adam_beta1 = reader.get_double("adam_beta1");
    artifact.training.adam_beta2 = reader.get_double("adam_beta2");
    artifact.training.adam_epsilon = reader.get_double("adam_epsilon");
    artifact.training.rng_seed = static_cast<std::uint64_t>(std::stoull(reader.get("rng_seed")));
    artifact.loss_summary.data_abs = reader.get_summary("data_abs");
    artifact.loss_summary.eikonal_data = reader.get_summary("eikonal_data");
    artifact.loss_summary.temporal_data = reader.get_summary("temporal_data");
    artifact.loss_summary.eikonal_reg = reader.get_summary("eikonal_reg");
    artifact.loss_summary.temporal_reg = reader.get_summary("temporal_reg");
    artifact.loss_summary.total = reader.get_summary("total");

    artifact.mlp.validate();
    artifact.transform.validate();
    artifact.training.validate();

    const long expected = artifact.mlp.parameter_count();
    if (reader.get_long("parameter_count") != expected)
        throw std::runtime_error(context + ": parameter count does not match the architecture");

    Eigen::VectorXd flat(expected);
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(flat.data()),
                static_cast<std::streamsize>(sizeof(double)) * expected);
        if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * expected))
            throw std::runtime_error(context + ": truncated parameter block");
    } else {
        for (long i = 0; i < expected; ++i) {
            char bytes[8];
            in.read(bytes, 8);
            if (in.gcount() != 8)
                throw std::runtime_error(context + ": truncated parameter block");
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b)
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[b]))
                        << (8 * b);
            std::memcpy(&flat[i], &bits, 8);
        }
    }
    artifact.params = ParameterSet::from_flat(artifact.mlp, flat);
    return artifact;
}

}  // namespace sdf4d
