#include <map>
#include <string>
#include <vector>

namespace wdiff::detail {

// Orthogonal scaling filters h_k, k = 0..F-1 (sqrt(2)-normalized). Daubechies
// and coiflet rows follow the PyWavelets reconstruction low-pass tables;
// symlet rows were polished to full double precision by
// tools/refine_symlets.py.
const std::map<std::string, std::vector<double>>& orthogonal_tables() {
  static const std::map<std::string, std::vector<double>> tables = {
    {"db1", {0.7071067811865476, 0.7071067811865476}},
    {"db2", {0.48296291314453416, 0.8365163037378079, 0.2241438680420134, -0.12940952255126037}},
    {"db3", {0.33267055295008263, 0.8068915093110925, 0.45987750211849154, -0.13501102001025458, -0.08544127388202666, 0.03522629188570953}},
    {"db4", {0.2303778133088965, 0.7148465705529157, 0.6308807679298589, -0.027983769416859854, -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032}},
    {"db5", {0.16010239797419293, 0.6038292697971896, 0.7243085284377729, 0.13842814590132074, -0.24229488706638203, -0.032244869584638375, 0.07757149384004572, -0.006241490212798274, -0.012580751999081999, 0.0033357252854737712}},
    {"db6", {0.11154074335010947, 0.49462389039845306, 0.7511339080210954, 0.31525035170919763, -0.22626469396543983, -0.12976686756726194, 0.09750160558732304, 0.027522865530305727, -0.03158203931748603, 0.0005538422011614961, 0.004777257510945511, -0.0010773010853084796}},
    {"db7", {0.07785205408500918, 0.3965393194819173, 0.7291320908462351, 0.4697822874051931, -0.14390600392856498, -0.22403618499387498, 0.07130921926683026, 0.08061260915108308, -0.03802993693501441, -0.01657454163066688, 0.01255099855609984, 0.0004295779729213665, -0.0018016407040474908, 0.00035371379997452024}},
    {"db8", {0.05441584224310401, 0.31287159091429995, 0.6756307362972898, 0.5853546836542067, -0.015829105256349306, -0.2840155429615469, 0.0004724845739132828, 0.12874742662047847, -0.017369301001807547, -0.044088253930794755, 0.013981027917398282, 0.008746094047405777, -0.004870352993451574, -0.00039174037337694705, 0.0006754494064505693, -0.00011747678412476953}},
    {"sym2", {0.48296291314453414, 0.83651630373780791, 0.22414386804201338, -0.12940952255126038}},
    {"sym3", {0.33267055295008262, 0.80689150931109258, 0.45987750211849157, -0.13501102001025459, -0.085441273882026662, 0.035226291885709537}},
    {"sym4", {0.032223100604051468, -0.012603967262031304, -0.099219543576633533, 0.29785779560530605, 0.80373875180513208, 0.49761866763277499, -0.029635527646002492, -0.075765714789502213}},
    {"sym5", {0.019538882735249827, -0.021101834024689041, -0.17532808990805622, 0.016602105764510848, 0.63397896345679206, 0.72340769040404079, 0.1993975339768556, -0.039134249302313844, 0.029519490925706261, 0.027333068344998769}},
    {"sym6", {-0.0078007083250323804, 0.0017677118642540077, 0.044724901770781385, -0.021060292512370848, -0.072637522786376583, 0.33792942172816583, 0.787641141028651, 0.49105594192797373, -0.048311742585698055, -0.11799011114852003, 0.0034907120842221625, 0.015404109327044824}},
    {"sym7", {0.010268176708464816, 0.0040102448715223952, -0.10780823770328971, -0.14004724044293365, 0.28862963175064787, 0.76776431700488293, 0.53610191709056923, 0.017441255086835707, -0.049552834937042832, 0.067892693501220565, 0.030515513165877886, -0.012636303403240567, -0.0010473848886797381, 0.002681814568260147}},
    {"sym8", {0.0018899503327676892, -0.00030292051472413308, -0.014952258337062199, 0.0038087520138944895, 0.049137179673730287, -0.027219029917103486, -0.051945838107881801, 0.36444189483617894, 0.77718575169962803, 0.48135965125905339, -0.061273359067811078, -0.14329423835127266, 0.0076074873249766082, 0.031695087811525991, -0.00054213233180001069, -0.0033824159510050026}},
    {"coif1", {-0.07273261951252645, 0.3378976624574818, 0.8525720202116004, 0.3848648468648578, -0.07273261951252645, -0.015655728135791993}},
    {"coif2", {0.01638733646320364, -0.04146493678687178, -0.0673725547237256, 0.3861100668227629, 0.8127236354494135, 0.4170051844232391, -0.07648859907828076, -0.05943441864643109, 0.02368017194684777, 0.005611434819368834, -0.0018232088709110323, -0.000720549445520347}},
    {"coif3", {-0.003793512864380802, 0.007782596425672746, 0.023452696142077168, -0.06577191128146936, -0.06112339000297255, 0.40517690240911824, 0.7937772226260872, 0.42848347637737, -0.07179982161915484, -0.08230192710629983, 0.03455502757329774, 0.015880544863669452, -0.009007976136730624, -0.0025745176881367972, 0.0011175187708306303, 0.0004662169598204029, -7.0983302506379e-05, -3.459977319727278e-05}},
  };
  return tables;
}

}  // namespace wdiff::detail
